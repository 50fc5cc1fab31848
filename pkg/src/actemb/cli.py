"""Command-line surface tying ingestion, training and evaluation together.

Subcommands: ingest, train, embed, eval, loco, project, gradcheck. Every
run resolves one ExperimentConfig (built-in defaults <- A2V_SEED env <-
--config file <- flags) and funnels all randomness through its single seed,
which is recorded in the header of every output file. Exit codes: 0 ok,
1 usage/config, 2 data, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import evaluate, ingest, modelio, seqmodel, synthetic, trainer
from .config import (
    DATASET_KINDS,
    FEATURE_SETS,
    FOLD_PER_FOLD,
    ExperimentConfig,
    load_config,
)
from .errors import ConfigError, DataError, NumericError
from .ingest import EventWindow, SensorWindow
from .trainer import EmbeddingSet

# child-stream keys under the master seed (trainer owns 0-2)
_STREAM_SYNTH_TRAIN = 10
_STREAM_SYNTH_TEST = 11

GRADCHECK_TOLERANCE = 1e-4


# ---------------------------------------------------------------------------
# Dataset assembly


@dataclass
class Bundle:
    """Everything a command needs from one dataset load."""

    kind: str
    train: list[SensorWindow]
    test: list[SensorWindow]
    classes: list[str]
    vocab: ingest.SensorVocab | None = None
    # ambient logs: per-fold event windows and an id lookup, when >= 6 days
    event_folds: list[tuple[list[EventWindow], list[EventWindow]]] | None = None
    events_by_id: dict[int, EventWindow] | None = None

    def all_windows(self) -> list[SensorWindow]:
        return self.train + self.test


def load_dataset(cfg: ExperimentConfig) -> Bundle:
    if cfg.kind == "synthetic":
        train = synthetic.sinusoid_windows(
            cfg.train_per_class, cfg.timesteps, cfg.channels,
            seed=cfg.seed * 100 + _STREAM_SYNTH_TRAIN,
        )
        test = synthetic.sinusoid_windows(
            cfg.test_per_class, cfg.timesteps, cfg.channels,
            seed=cfg.seed * 100 + _STREAM_SYNTH_TEST, id_start=len(train),
        )
    elif cfg.kind == "har":
        train, test = ingest.load_har(cfg.path)
    elif cfg.kind == "casas":
        return _load_casas(cfg)
    else:  # pragma: no cover - validate() rejects earlier
        raise ConfigError(f"unknown dataset kind {cfg.kind!r}")
    classes = sorted({w.label for w in train} | {w.label for w in test})
    return Bundle(kind=cfg.kind, train=train, test=test, classes=classes)


def _load_casas(cfg: ExperimentConfig) -> Bundle:
    events = ingest.read_casas_file(cfg.path)
    ewindows = ingest.window_events(events, cfg.k, cfg.stride)
    if not ewindows:
        raise DataError(
            f"{cfg.path} yields no windows for k={cfg.k} (only {len(events)} events)"
        )
    try:
        folds = ingest.split_hh101(ewindows)
    except DataError:
        # short fixtures (< 6 days): everything is training data
        folds = None
    if folds is None:
        train_ew = ewindows
        test_ew: list[EventWindow] = []
    else:
        train_ew = [w for tr, _ in folds for w in tr]
        test_ew = [w for _, te in folds for w in te]
    vocab = ingest.build_vocab(train_ew)
    train = ingest.encode_event_windows(train_ew, vocab)
    test = ingest.encode_event_windows(test_ew, vocab)
    classes = sorted({w.label for w in ewindows})
    return Bundle(
        kind="casas", train=train, test=test, classes=classes, vocab=vocab,
        event_folds=folds, events_by_id={w.id: w for w in ewindows},
    )


# ---------------------------------------------------------------------------
# Feature sets


def _raw_features(windows: list[SensorWindow]) -> np.ndarray:
    if not windows:
        return np.zeros((0, 0))
    shapes = {w.data.shape for w in windows}
    if len(shapes) != 1:
        raise DataError(f"raw features need equal-shaped windows, got {sorted(shapes)}")
    return np.stack([w.data.reshape(-1) for w in windows])


def _handcrafted_features(bundle: Bundle, windows: list[SensorWindow]) -> np.ndarray:
    if not windows:
        return np.zeros((0, 0))
    if bundle.kind == "casas":
        rows = [
            ingest.handcrafted_casas(bundle.events_by_id[w.id], bundle.vocab)
            for w in windows
        ]
    else:
        rows = [ingest.handcrafted_har(w) for w in windows]
    return np.stack(rows)


def _feature_matrices(
    bundle: Bundle,
    feature_tag: str,
    train: list[SensorWindow],
    test: list[SensorWindow],
    model: seqmodel.Seq2SeqModel | None,
) -> tuple[np.ndarray, np.ndarray]:
    if feature_tag == "raw":
        return _raw_features(train), _raw_features(test)
    if feature_tag == "handcrafted":
        tr = _handcrafted_features(bundle, train)
        te = _handcrafted_features(bundle, test)
        stats = ingest.fit_normalize(tr)
        te_norm = ingest.apply_normalize(te, stats) if len(te) else te
        return ingest.apply_normalize(tr, stats), te_norm
    if feature_tag == "activity2vec":
        if model is None:
            raise ConfigError("feature set activity2vec needs a trained model (--model)")
        return (
            trainer.embed_all(train, model).embeddings,
            trainer.embed_all(test, model).embeddings,
        )
    raise ConfigError(f"unknown feature set {feature_tag!r}")


# ---------------------------------------------------------------------------
# Output helpers


def _ensure_out(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_embeddings_csv(path: str, emb: EmbeddingSet, seed: int) -> None:
    header = "id,label," + ",".join(f"z{j}" for j in range(emb.embedding_dim))
    lines = [f"# seed={seed}", header]
    for i in range(len(emb)):
        values = ",".join(repr(float(v)) for v in emb.embeddings[i])
        lines.append(f"{emb.ids[i]},{emb.labels[i]},{values}")
    _write_lines(path, lines)


def _write_loss_csv(path: str, history: list[float], seed: int) -> None:
    lines = [f"# seed={seed}", "epoch,loss"]
    lines += [f"{i + 1},{repr(float(v))}" for i, v in enumerate(history)]
    _write_lines(path, lines)


def _write_projection_csv(path: str, emb: EmbeddingSet, coords: np.ndarray,
                          seed: int) -> None:
    lines = [f"# seed={seed}", "id,label,x,y"]
    for i in range(len(emb)):
        lines.append(
            f"{emb.ids[i]},{emb.labels[i]},"
            f"{repr(float(coords[i, 0]))},{repr(float(coords[i, 1]))}"
        )
    _write_lines(path, lines)


def _dataset_descriptor(cfg: ExperimentConfig, bundle: Bundle) -> dict:
    desc = {"kind": bundle.kind, "classes": bundle.classes}
    if bundle.train:
        desc["input_dim"] = int(bundle.train[0].data.shape[1])
    if bundle.vocab is not None:
        desc["sensor_vocab"] = bundle.vocab.sensors
        desc["window_k"] = cfg.k
        desc["window_stride"] = cfg.stride
    return desc


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(cfg: ExperimentConfig) -> int:
    bundle = load_dataset(cfg)
    out = _ensure_out(cfg)
    for split, windows in (("train", bundle.train), ("test", bundle.test)):
        ingest.write_sequence_csv(
            os.path.join(out, f"windows_{split}.csv"), windows, cfg.seed
        )
        feats = _handcrafted_features(bundle, windows)
        if len(feats):
            stats = ingest.fit_normalize(_handcrafted_features(bundle, bundle.train))
            feats = ingest.apply_normalize(feats, stats)
        ingest.write_features_csv(
            os.path.join(out, f"features_{split}.csv"),
            [w.id for w in windows], [w.label for w in windows], feats, cfg.seed,
        )
    total = len(bundle.train) + len(bundle.test)
    print(f"{total} windows")
    print(f"train: {len(bundle.train)}  test: {len(bundle.test)}")
    counts: dict[str, int] = {}
    for w in bundle.all_windows():
        counts[w.label] = counts.get(w.label, 0) + 1
    for label in sorted(counts):
        print(f"  {label}: {counts[label]}")
    return 0


def _train_windows(bundle: Bundle) -> list[SensorWindow]:
    return bundle.train


def cmd_train(cfg: ExperimentConfig) -> int:
    bundle = load_dataset(cfg)
    out = _ensure_out(cfg)
    train_cfg = cfg.to_train_config()
    descriptor = _dataset_descriptor(cfg, bundle)

    def checkpoint(epoch: int, model: seqmodel.Seq2SeqModel, _loss: float) -> None:
        if cfg.checkpoint_interval > 0 and epoch % cfg.checkpoint_interval == 0:
            modelio.save_model(
                model, os.path.join(out, f"model_epoch{epoch}.json"),
                cfg.seed, descriptor,
            )

    model, history = trainer.train(_train_windows(bundle), train_cfg, on_epoch=checkpoint)
    modelio.save_model(model, os.path.join(out, "model.json"), cfg.seed, descriptor)
    _write_loss_csv(os.path.join(out, "loss.csv"), history, cfg.seed)
    print(f"trained {cfg.epochs} epochs; final mean objective {history[-1]:.6g}")
    print(f"model: {os.path.join(out, 'model.json')}")
    return 0


def _load_model_arg(cfg: ExperimentConfig, model_path: str | None) -> seqmodel.Seq2SeqModel:
    path = model_path or os.path.join(cfg.out_dir, "model.json")
    model, _ = modelio.load_model(path)
    return model


def cmd_embed(cfg: ExperimentConfig, model_path: str | None) -> int:
    bundle = load_dataset(cfg)
    out = _ensure_out(cfg)
    model = _load_model_arg(cfg, model_path)
    for split, windows in (("train", bundle.train), ("test", bundle.test)):
        emb = trainer.embed_all(windows, model)
        _write_embeddings_csv(
            os.path.join(out, f"embeddings_{split}.csv"), emb, cfg.seed
        )
    print(f"embedded {len(bundle.train)} train / {len(bundle.test)} test windows")
    return 0


def _eval_simple(bundle: Bundle, cfg: ExperimentConfig,
                 model: seqmodel.Seq2SeqModel | None) -> evaluate.EvalReport:
    if not bundle.test:
        raise DataError("evaluation needs a non-empty test split")
    tr, te = _feature_matrices(bundle, cfg.features, bundle.train, bundle.test, model)
    forest = evaluate.train_forest(
        tr, [w.label for w in bundle.train], cfg.n_trees, cfg.seed
    )
    y_pred = evaluate.forest_predict_batch(forest, te)
    return evaluate.build_report(
        cfg.features, [w.label for w in bundle.test], y_pred, bundle.classes,
        features_for_intra=te, intra_labels=[w.label for w in bundle.test],
    )


def _eval_folds(bundle: Bundle, cfg: ExperimentConfig,
                model: seqmodel.Seq2SeqModel | None) -> evaluate.EvalReport:
    encoded = {w.id: w for w in bundle.all_windows()}
    pooled_true: list[str] = []
    pooled_pred: list[str] = []
    pooled_feats: list[np.ndarray] = []
    fold_reports: list[evaluate.EvalReport] = []
    for tr_ew, te_ew in bundle.event_folds:
        tr_w = [encoded[w.id] for w in tr_ew]
        te_w = [encoded[w.id] for w in te_ew]
        if not te_w or len({w.label for w in tr_w}) < 2:
            continue
        tr, te = _feature_matrices(bundle, cfg.features, tr_w, te_w, model)
        forest = evaluate.train_forest(tr, [w.label for w in tr_w], cfg.n_trees, cfg.seed)
        y_pred = evaluate.forest_predict_batch(forest, te)
        y_true = [w.label for w in te_w]
        pooled_true += y_true
        pooled_pred += y_pred
        pooled_feats.append(te)
        fold_reports.append(
            evaluate.build_report(cfg.features, y_true, y_pred, bundle.classes)
        )
    if not pooled_true:
        raise DataError("no usable folds for evaluation")
    feats = np.vstack(pooled_feats)
    if cfg.fold_average == FOLD_PER_FOLD:
        # arithmetic mean of per-fold scores over the global class list
        per_f1 = {c: float(np.mean([r.f1[c] for r in fold_reports])) for c in bundle.classes}
        prec = {c: float(np.mean([r.precision[c] for r in fold_reports])) for c in bundle.classes}
        rec = {c: float(np.mean([r.recall[c] for r in fold_reports])) for c in bundle.classes}
        intra = evaluate.intra_class_similarity(feats, pooled_true)
        return evaluate.EvalReport(
            feature_tag=cfg.features, classes=bundle.classes, precision=prec,
            recall=rec, f1=per_f1,
            macro_f1=float(np.mean(list(per_f1.values()))),
            confusion=evaluate.confusion_matrix(pooled_true, pooled_pred, bundle.classes),
            intra={c: intra.get(c) for c in bundle.classes},
        )
    return evaluate.build_report(
        cfg.features, pooled_true, pooled_pred, bundle.classes,
        features_for_intra=feats, intra_labels=pooled_true,
    )


def cmd_eval(cfg: ExperimentConfig, model_path: str | None) -> int:
    bundle = load_dataset(cfg)
    out = _ensure_out(cfg)
    model = None
    if cfg.features == "activity2vec":
        model = _load_model_arg(cfg, model_path)
    if bundle.event_folds:
        report = _eval_folds(bundle, cfg, model)
    else:
        report = _eval_simple(bundle, cfg, model)
    _write_lines(os.path.join(out, f"report_{cfg.features}.csv"), report.csv_lines(cfg.seed))
    print(report.table_str())
    return 0


def cmd_loco(cfg: ExperimentConfig, excluded: str | None) -> int:
    bundle = load_dataset(cfg)
    out = _ensure_out(cfg)
    if not bundle.test:
        raise DataError("leave-one-class-out needs a non-empty test split")
    train_classes = sorted({w.label for w in bundle.train})
    targets = [excluded] if excluded else train_classes
    train_cfg = cfg.to_train_config()
    for cls in targets:
        if cls not in train_classes:
            raise DataError(f"class {cls!r} not present in training data")
        report = evaluate.leave_one_class_out(
            bundle.train, bundle.test, cls, train_cfg, cfg.n_trees, cfg.seed
        )
        slug = cls.replace(" ", "_")
        _write_lines(
            os.path.join(out, f"report_loco_{slug}.csv"), report.csv_lines(cfg.seed)
        )
        print(f"excluded class: {cls}")
        print(report.table_str())
        print()
    return 0


def cmd_project(cfg: ExperimentConfig, model_path: str | None, split: str) -> int:
    bundle = load_dataset(cfg)
    out = _ensure_out(cfg)
    model = _load_model_arg(cfg, model_path)
    windows = {"train": bundle.train, "test": bundle.test,
               "all": bundle.all_windows()}[split]
    if len(windows) < 2:
        raise DataError(f"projection needs >= 2 windows in split {split!r}")
    emb = trainer.embed_all(windows, model)
    coords = evaluate.pca_project(emb.embeddings, dims=2)
    path = os.path.join(out, f"projection_{split}.csv")
    _write_projection_csv(path, emb, coords, cfg.seed)
    print(f"wrote {path}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    err = seqmodel.gradcheck(
        t=args.T, d=args.D, h=args.H, mode=args.mode,
        l1_lambda=args.l1, seed=args.seed if args.seed is not None else 0,
        output_activation=args.output_activation,
    )
    print(f"max relative gradient error: {err:.6e}")
    if err > GRADCHECK_TOLERANCE:
        raise NumericError(
            f"gradient check failed: {err:.6e} > {GRADCHECK_TOLERANCE:.0e}"
        )
    return 0


# ---------------------------------------------------------------------------
# Argument plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 1, not argparse's default 2
        raise ConfigError(message)


_OVERRIDES = (
    # (flag dest, config field)
    ("dataset", "kind"),
    ("path", "path"),
    ("k", "k"),
    ("stride", "stride"),
    ("embedding_dim", "embedding_dim"),
    ("mode", "mode"),
    ("output_activation", "output_activation"),
    ("epochs", "epochs"),
    ("lr", "lr"),
    ("noise_std", "noise_std"),
    ("l1_lambda", "l1_lambda"),
    ("seed", "seed"),
    ("batch", "batch"),
    ("checkpoint_interval", "checkpoint_interval"),
    ("n_trees", "n_trees"),
    ("features", "features"),
    ("fold_average", "fold_average"),
    ("out", "out_dir"),
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config file (INI sections)")
    p.add_argument("--dataset", choices=DATASET_KINDS, help="dataset kind")
    p.add_argument("--path", help="dataset file (casas) or directory (har)")
    p.add_argument("--k", type=int, help="events per window (ambient logs)")
    p.add_argument("--stride", type=int, help="window stride in events")
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int)
    p.add_argument("--mode", choices=seqmodel.MODES, help="decoder wiring")
    p.add_argument("--output-activation", dest="output_activation",
                   choices=seqmodel.ACTIVATIONS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--l1-lambda", dest="l1_lambda", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch", choices=(trainer.BATCH_PER_WINDOW, trainer.BATCH_FULL))
    p.add_argument("--checkpoint-interval", dest="checkpoint_interval", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--features", choices=FEATURE_SETS)
    p.add_argument("--fold-average", dest="fold_average",
                   choices=("pooled", "per-fold"))
    p.add_argument("--out", help="output directory")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """defaults <- A2V_SEED env <- config file <- explicit flags."""
    cfg = ExperimentConfig()
    env_seed = os.environ.get("A2V_SEED")
    if env_seed is not None:
        try:
            cfg.seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"A2V_SEED must be an integer, got {env_seed!r}") from exc
    if getattr(args, "config", None):
        file_cfg = load_config(args.config)
        for f_name in vars(file_cfg):
            setattr(cfg, f_name, getattr(file_cfg, f_name))
        if env_seed is not None and "seed" not in _file_keys(args.config):
            cfg.seed = int(env_seed)
    for dest, field_name in _OVERRIDES:
        value = getattr(args, dest, None)
        if value is not None:
            setattr(cfg, field_name, value)
    cfg.validate()
    return cfg


def _file_keys(path: str) -> set[str]:
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    return {name for section in parser.sections() for name in parser[section]}


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="actemb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (
        ("ingest", lambda a: cmd_ingest(resolve_config(a))),
        ("train", lambda a: cmd_train(resolve_config(a))),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("embed")
    _add_common(p)
    p.add_argument("--model", help="model file (default: <out>/model.json)")
    p.set_defaults(func=lambda a: cmd_embed(resolve_config(a), a.model))

    p = sub.add_parser("eval")
    _add_common(p)
    p.add_argument("--model", help="model file (default: <out>/model.json)")
    p.set_defaults(func=lambda a: cmd_eval(resolve_config(a), a.model))

    p = sub.add_parser("loco")
    _add_common(p)
    p.add_argument("--excluded", help="single class to exclude (default: each in turn)")
    p.set_defaults(func=lambda a: cmd_loco(resolve_config(a), a.excluded))

    p = sub.add_parser("project")
    _add_common(p)
    p.add_argument("--model", help="model file (default: <out>/model.json)")
    p.add_argument("--split", choices=("train", "test", "all"), default="train")
    p.set_defaults(func=lambda a: cmd_project(resolve_config(a), a.model, a.split))

    p = sub.add_parser("gradcheck")
    p.add_argument("--T", type=int, default=4)
    p.add_argument("--D", type=int, default=3)
    p.add_argument("--H", type=int, default=2)
    p.add_argument("--mode", choices=seqmodel.MODES, default=seqmodel.MODE_PAPER)
    p.add_argument("--l1", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output-activation", dest="output_activation",
                   choices=seqmodel.ACTIVATIONS, default=seqmodel.ACT_LINEAR)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
