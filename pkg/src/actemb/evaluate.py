"""Embedding-quality evaluation: a from-scratch random forest (CART + Gini,
bootstrap, random feature subsets), per-class F1, intra-class similarity,
the leave-one-class-out protocol, and a 2-D PCA projection for plots.

Every tie anywhere (vote ties, leaf ties, dominant splits) breaks toward the
lexicographically smallest class label, so results are reproducible from
(X, y, seed) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, trainer
from .errors import DataError
from .ndcore import Rng
from .trainer import EmbeddingSet, TrainConfig

UNDEFINED = "undefined"  # intra-class marker for classes with < 2 samples


# ---------------------------------------------------------------------------
# CART / random forest


@dataclass
class TreeNode:
    """Split node or leaf; leaves carry per-class sample counts."""

    counts: np.ndarray | None = None
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.counts is not None


@dataclass
class Forest:
    trees: list[TreeNode]
    classes: list[str]  # sorted label set
    n_trees: int
    seed: int
    n_features: int
    max_features: str = "sqrt"


def _class_counts(y: np.ndarray, n_classes: int) -> np.ndarray:
    return np.bincount(y, minlength=n_classes).astype(np.float64)


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, rng: Rng,
               n_sub: int) -> TreeNode:
    n = x.shape[0]
    counts = _class_counts(y, n_classes)
    if n < 2 or (counts > 0).sum() == 1:
        return TreeNode(counts=counts)
    feats = np.sort(rng.choice(x.shape[1], size=n_sub, replace=False)).astype(np.int64)
    feat, thr, _ = kernels.best_split(x, y, feats, n_classes)
    if feat < 0:
        return TreeNode(counts=counts)
    mask = x[:, feat] <= thr
    return TreeNode(
        feature=int(feat),
        threshold=float(thr),
        left=_grow_tree(x[mask], y[mask], n_classes, rng, n_sub),
        right=_grow_tree(x[~mask], y[~mask], n_classes, rng, n_sub),
    )


def train_forest(x: np.ndarray, y: list[str] | np.ndarray, n_trees: int = 100,
                 seed: int = 0, max_features: str = "sqrt") -> Forest:
    """Bootstrap-bagged CART ensemble: Gini splits over ceil(sqrt(F)) random
    features per node, grown until pure or below two samples.

    Tree #i draws its bootstrap and feature subsets from the child stream
    ``Rng(seed).child(i)``, so trees are independent and the whole forest is
    a pure function of (x, y, seed).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = [str(v) for v in y]
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise DataError(f"feature matrix {x.shape} does not align with {len(labels)} labels")
    if x.shape[0] < 2:
        raise DataError("need at least 2 samples to train a forest")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError(f"need >= 2 classes, got only {classes}")
    if max_features != "sqrt":
        raise ValueError(f"unsupported max_features rule {max_features!r}")
    index = {c: i for i, c in enumerate(classes)}
    codes = np.array([index[l] for l in labels], dtype=np.int64)
    n, n_feats = x.shape
    n_sub = math.ceil(math.sqrt(n_feats))
    root = Rng(seed)
    trees = []
    for i in range(n_trees):
        rng = root.child(i)
        boot = np.asarray(rng.integers(0, n, size=n), dtype=np.int64)
        trees.append(
            _grow_tree(np.ascontiguousarray(x[boot]), codes[boot], len(classes), rng, n_sub)
        )
    return Forest(trees=trees, classes=classes, n_trees=n_trees, seed=seed,
                  n_features=n_feats, max_features=max_features)


def _leaf_for(node: TreeNode, row: np.ndarray) -> np.ndarray:
    while not node.is_leaf:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.counts


def forest_predict(forest: Forest, row: np.ndarray) -> str:
    """Majority vote over trees; ties break to the lexicographically
    smallest class (class indices are sorted labels)."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (forest.n_features,):
        raise DataError(
            f"sample shape {row.shape} does not match forest features ({forest.n_features},)"
        )
    votes = np.zeros(len(forest.classes), dtype=np.int64)
    for tree in forest.trees:
        counts = _leaf_for(tree, row)
        votes[int(counts.argmax())] += 1  # argmax = first max = smallest class index
    return forest.classes[int(votes.argmax())]


def forest_predict_batch(forest: Forest, x: np.ndarray) -> list[str]:
    x = np.asarray(x, dtype=np.float64)
    return [forest_predict(forest, x[i]) for i in range(x.shape[0])]


# ---------------------------------------------------------------------------
# Metrics


def confusion_matrix(
    y_true: list[str], y_pred: list[str], classes: list[str]
) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    mat = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        mat[index[t], index[p]] += 1
    return mat


def f1_per_class(
    y_true: list[str], y_pred: list[str], classes: list[str] | None = None
) -> tuple[dict[str, float], float]:
    """One-vs-rest precision/recall/F1 per class; any zero denominator makes
    that quantity 0. Returns (per-class F1, macro average)."""
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if len(y_true) == 0:
        raise ValueError("empty label vectors")
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred))
    per: dict[str, float] = {}
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / (tp + fn) if tp + fn > 0 else 0.0
        per[c] = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    macro = sum(per.values()) / len(classes)
    return per, macro


def precision_recall(
    y_true: list[str], y_pred: list[str], classes: list[str]
) -> tuple[dict[str, float], dict[str, float]]:
    prec: dict[str, float] = {}
    rec: dict[str, float] = {}
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec[c] = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec[c] = tp / (tp + fn) if tp + fn > 0 else 0.0
    return prec, rec


def intra_class_similarity(
    x: np.ndarray, y: list[str]
) -> dict[str, float | None]:
    """Mean Euclidean distance over all unordered same-class pairs; classes
    with fewer than two samples map to None (reported as "undefined")."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = [str(v) for v in y]
    out: dict[str, float | None] = {}
    for c in sorted(set(labels)):
        idx = [i for i, l in enumerate(labels) if l == c]
        if len(idx) < 2:
            out[c] = None
        else:
            out[c] = float(kernels.mean_pairwise(np.ascontiguousarray(x[idx])))
    return out


# ---------------------------------------------------------------------------
# PCA projection


def pca_project(x: np.ndarray, dims: int = 2) -> np.ndarray:
    """Mean-centered projection onto the top principal axes, each axis
    oriented so its largest-magnitude loading is positive."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError(f"pca_project needs at least 2 samples, got shape {x.shape}")
    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:dims]
    axes = eigvecs[:, order]
    for j in range(axes.shape[1]):
        if axes[np.abs(axes[:, j]).argmax(), j] < 0:
            axes[:, j] = -axes[:, j]
    return centered @ axes


# ---------------------------------------------------------------------------
# Reports


@dataclass
class EvalReport:
    """Per-class quality table for one feature set."""

    feature_tag: str  # "raw" | "handcrafted" | "activity2vec"
    classes: list[str]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    macro_f1: float
    confusion: np.ndarray
    intra: dict[str, float | None] = field(default_factory=dict)

    def csv_lines(self, seed: int) -> list[str]:
        lines = [f"# seed={seed}", "class,P,R,F1,intra_class"]
        for c in self.classes:
            intra = self.intra.get(c)
            intra_txt = UNDEFINED if intra is None else repr(float(intra))
            lines.append(
                f"{c},{repr(self.precision[c])},{repr(self.recall[c])},"
                f"{repr(self.f1[c])},{intra_txt}"
            )
        lines.append(f"macro_f1,{repr(self.macro_f1)},,,")
        return lines

    def table_str(self) -> str:
        width = max(len(c) for c in self.classes + ["class"])
        rows = [
            f"feature set: {self.feature_tag}",
            f"{'class':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}  {'intra':>9}",
        ]
        for c in self.classes:
            intra = self.intra.get(c)
            intra_txt = UNDEFINED if intra is None else f"{intra:9.4f}"
            rows.append(
                f"{c:<{width}}  {self.precision[c]:6.3f}  {self.recall[c]:6.3f}  "
                f"{self.f1[c]:6.3f}  {intra_txt:>9}"
            )
        rows.append(f"macro F1: {self.macro_f1:.4f}")
        return "\n".join(rows)


def build_report(
    feature_tag: str,
    y_true: list[str],
    y_pred: list[str],
    classes: list[str],
    features_for_intra: np.ndarray | None = None,
    intra_labels: list[str] | None = None,
) -> EvalReport:
    """Assemble an EvalReport; intra-class distances are computed over
    ``features_for_intra`` (typically the test features), when given."""
    f1, macro = f1_per_class(y_true, y_pred, classes)
    prec, rec = precision_recall(y_true, y_pred, classes)
    conf = confusion_matrix(y_true, y_pred, classes)
    intra: dict[str, float | None] = {}
    if features_for_intra is not None:
        computed = intra_class_similarity(features_for_intra, intra_labels or y_true)
        intra = {c: computed.get(c) for c in classes}
    return EvalReport(
        feature_tag=feature_tag, classes=list(classes), precision=prec,
        recall=rec, f1=f1, macro_f1=macro, confusion=conf, intra=intra,
    )


# ---------------------------------------------------------------------------
# Leave-one-class-out protocol


def leave_one_class_out(
    train_windows: list,
    test_windows: list,
    excluded_class: str,
    cfg: TrainConfig,
    n_trees: int = 100,
    forest_seed: int = 0,
) -> EvalReport:
    """Train the autoencoder WITHOUT one class, then embed everything.

    The excluded class is removed only from the autoencoder's training
    corpus; the downstream forest still trains on the full embedded training
    set (excluded class included) and is scored on the test set.
    """
    if not any(w.label == excluded_class for w in train_windows):
        raise DataError(f"class {excluded_class!r} not present in the training windows")
    corpus = [w for w in train_windows if w.label != excluded_class]
    if not corpus:
        raise DataError(f"excluding {excluded_class!r} empties the training set")
    model, _ = trainer.train(corpus, cfg)
    emb_train: EmbeddingSet = trainer.embed_all(train_windows, model)
    emb_test: EmbeddingSet = trainer.embed_all(test_windows, model)
    forest = train_forest(emb_train.embeddings, emb_train.labels, n_trees, forest_seed)
    y_pred = forest_predict_batch(forest, emb_test.embeddings)
    classes = sorted(set(emb_train.labels) | set(emb_test.labels))
    return build_report(
        "activity2vec", emb_test.labels, y_pred, classes,
        features_for_intra=emb_test.embeddings, intra_labels=emb_test.labels,
    )
