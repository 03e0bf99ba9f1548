"""Transfer model container, prediction and serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import AlignmentError, FormatError, TrainingError, VersionError

MODEL_VERSION = 1
FEATURE_SCALE = 0.1
VARIANTS = ("logreg", "mlp", "knn", "random_forest")


@dataclass
class TransferModel:
    variant: str
    params: dict
    input_dim: int
    seed: int | None = None
    ucs_checksum: str | None = None
    training_metadata: dict = field(default_factory=dict)
    feature_scale: float = FEATURE_SCALE


@dataclass(frozen=True)
class Verdict:
    sample_id: str
    probability: float | None
    predicted_label: int
    source: str = "trained"


def check_training_data(features, labels) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2:
        raise TrainingError(f"features must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise TrainingError(f"{y.shape[0] if y.ndim else 0} labels for {X.shape[0]} rows")
    if not np.all(np.isfinite(X)):
        raise TrainingError("features contain NaN or infinite values")
    if not np.isin(y, (0, 1)).all():
        raise TrainingError("labels must be 0/1")
    y = y.astype(np.int64)
    counts = np.bincount(y, minlength=2)
    if (counts == 0).any():
        raise TrainingError("training labels contain a single class")
    return X, y


def balanced_weights(y: np.ndarray) -> np.ndarray:
    """weight_c = N / (2 * N_c), per sample."""
    counts = np.bincount(y, minlength=2).astype(np.float64)
    return (len(y) / (2.0 * counts))[y]


def _check_input(model: TransferModel, X, checksum) -> np.ndarray:
    if checksum is not None and model.ucs_checksum is not None and checksum != model.ucs_checksum:
        raise AlignmentError("vector was produced under a different criteria set than the model")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.input_dim:
        raise AlignmentError(f"model expects {model.input_dim} features, got {X.shape[1]}")
    return X * model.feature_scale


def predict_proba(model: TransferModel, features, checksum: str | None = None) -> np.ndarray:
    """Positive-class probability per row of raw (0-10) feature vectors."""
    from . import forest, knn, logistic, mlp

    X = _check_input(model, features, checksum)
    impl = {
        "logreg": logistic.proba,
        "mlp": mlp.proba,
        "random_forest": forest.proba,
        "knn": knn.proba,
    }.get(model.variant)
    if impl is None:
        raise FormatError(f"unknown model variant {model.variant!r}")
    return impl(model.params, X)


def labels_from_proba(p: np.ndarray) -> np.ndarray:
    # p == 0.5 goes to the positive class
    return (np.asarray(p) >= 0.5).astype(np.int64)


def predict(model: TransferModel, vector) -> Verdict:
    """Verdict for one ConceptVector (or any object with sample_id/ucs_checksum/values)."""
    p = float(predict_proba(model, vector.values, vector.ucs_checksum)[0])
    return Verdict(vector.sample_id, p, int(p >= 0.5), "trained")


def predict_many(model: TransferModel, features, sample_ids: Sequence[str],
                 checksum: str | None = None) -> list[Verdict]:
    p = predict_proba(model, features, checksum)
    return [Verdict(sid, float(pi), int(pi >= 0.5), "trained") for sid, pi in zip(sample_ids, p)]


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.tolist(), "dtype": str(value.dtype), "shape": list(value.shape)}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value):
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=value["dtype"]).reshape(value["shape"])
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def model_to_dict(model: TransferModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "variant": model.variant,
        "input_dim": model.input_dim,
        "seed": model.seed,
        "ucs_checksum": model.ucs_checksum,
        "feature_scale": model.feature_scale,
        "training_metadata": _encode(model.training_metadata),
        "params": _encode(model.params),
    }


def save_model(model: TransferModel, path) -> None:
    # JSON floats are written with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TransferModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not a model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise VersionError(f"{path}: unsupported model version {doc.get('version')!r}")
    try:
        model = TransferModel(
            variant=doc["variant"],
            params=_decode(doc["params"]),
            input_dim=int(doc["input_dim"]),
            seed=doc.get("seed"),
            ucs_checksum=doc.get("ucs_checksum"),
            training_metadata=_decode(doc.get("training_metadata") or {}),
            feature_scale=float(doc.get("feature_scale", FEATURE_SCALE)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model file: {exc!r}") from exc
    if model.variant not in VARIANTS:
        raise FormatError(f"{path}: unknown variant {model.variant!r}")
    return model
