"""k-nearest-neighbour vote classifier."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import TrainingError
from . import _kernels
from .model import FEATURE_SCALE, TransferModel, check_training_data


@dataclass(frozen=True)
class KNNConfig:
    k: int = 5


def fit_knn(features, labels, config: KNNConfig = KNNConfig(), sample_ids: Sequence[str] | None = None,
            seed: int | None = None, ucs_checksum: str | None = None) -> TransferModel:
    """Store the training set. Distance ties resolve to the lexicographically lower sample id."""
    X, y = check_training_data(features, labels)
    if len(y) < config.k:
        raise TrainingError(f"need at least {config.k} training samples, got {len(y)}")
    ids = list(sample_ids) if sample_ids is not None else [f"{i:09d}" for i in range(len(y))]
    if len(ids) != len(y):
        raise TrainingError("sample_ids length does not match features")
    id_rank = np.empty(len(ids), dtype=np.int64)
    id_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
    return TransferModel(
        variant="knn",
        params={"X": X * FEATURE_SCALE, "y": y, "id_rank": id_rank, "k": config.k},
        input_dim=X.shape[1],
        seed=seed,
        ucs_checksum=ucs_checksum,
        training_metadata={"hyperparameters": asdict(config), "n_samples": len(y)},
    )


def neighbours(params, Xs) -> np.ndarray:
    return _kernels.knn_indices(
        np.ascontiguousarray(Xs, dtype=np.float64),
        np.ascontiguousarray(params["X"], dtype=np.float64),
        np.ascontiguousarray(params["id_rank"], dtype=np.int64),
        int(params["k"]),
    )


def proba(params, Xs):
    nb = neighbours(params, Xs)
    return np.asarray(params["y"])[nb].mean(axis=1)
