"""Model persistence: a versioned JSON file with decimal-exact parameters.

Floats are serialized with Python's shortest round-trip repr, so
load(save(model)) reproduces every parameter bit for bit. Parameter blocks
appear in the canonical key order of :data:`actemb.seqmodel.PARAM_KEYS`;
matrices are stored row-major as nested lists.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import DataError
from .seqmodel import PARAM_KEYS, LstmParams, Seq2SeqModel

SCHEMA_VERSION = 1


def save_model(model: Seq2SeqModel, path: str, seed: int,
               dataset: dict | None = None) -> None:
    """Write the model plus a free-form dataset descriptor (input width,
    sensor vocabulary, normalization stats...)."""
    model.validate()
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": int(seed),
        "dataset": dataset or {},
        "model": {
            "input_dim": model.input_dim,
            "embedding_dim": model.embedding_dim,
            "enc_hidden": model.enc_fwd.hidden_dim,
            "mode": model.mode,
            "output_activation": model.output_activation,
        },
        "params": {
            key: {
                "shape": list(model._resolve(key).shape),
                "data": model._resolve(key).reshape(-1).tolist(),  # row-major
            }
            for key in PARAM_KEYS
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str) -> tuple[Seq2SeqModel, dict]:
    """Read a model file; returns (model, full document). Rejects unknown
    schema versions and shape-inconsistent parameters."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataError(
            f"model file {path} has schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    meta = doc.get("model", {})
    params = doc.get("params", {})
    missing = [k for k in PARAM_KEYS if k not in params]
    if missing:
        raise DataError(f"model file {path} lacks parameter blocks {missing}")

    def arr(key: str) -> np.ndarray:
        block = params[key]
        try:
            return np.asarray(block["data"], dtype=np.float64).reshape(block["shape"])
        except (TypeError, KeyError, ValueError) as exc:
            raise DataError(f"bad parameter block {key} in {path}: {exc}") from exc

    def block(prefix: str) -> LstmParams:
        return LstmParams(
            w_x=arr(f"{prefix}.w_x"), w_h=arr(f"{prefix}.w_h"), b=arr(f"{prefix}.b")
        )

    model = Seq2SeqModel(
        enc_fwd=block("enc_fwd"),
        enc_bwd=block("enc_bwd"),
        dec=block("dec"),
        w_out=arr("w_out"),
        b_out=arr("b_out"),
        mode=meta.get("mode", "paper-literal"),
        output_activation=meta.get("output_activation", "linear"),
    )
    try:
        model.validate()
    except ValueError as exc:
        raise DataError(f"inconsistent model file {path}: {exc}") from exc
    return model, doc
