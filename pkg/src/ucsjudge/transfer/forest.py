"""Random forest of Gini trees with class-weighted impurity and impurity-decrease importances."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .model import FEATURE_SCALE, TransferModel, balanced_weights, check_training_data

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int = 10
    max_features: str | int | None = "sqrt"  # "sqrt", an int, or None for all
    bootstrap: bool = True
    class_weight: str | None = "balanced"
    min_samples_split: int = 2


def _n_features(spec, d):
    if spec is None:
        return d
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(int(spec), d))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importances: np.ndarray  # unnormalised weighted impurity decrease per feature


def build_tree(X, y, w, max_depth, n_feat, rng, min_samples_split=2, splitter=None) -> Tree:
    """Grow one tree depth-first; rows with zero weight are excluded.

    Nodes are numbered in pre-order. A node becomes a leaf when it is pure,
    at ``max_depth``, holds fewer than ``min_samples_split`` rows, or no
    candidate feature yields a positive impurity decrease.
    """
    splitter = splitter or _kernels.best_split
    d = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []
    importances = np.zeros(d)
    root = np.flatnonzero(w > 0).astype(np.int64)
    stack = [(root, 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        wn = w[idx]
        w1 = float(np.sum(wn[y[idx] == 1]))
        wt = float(np.sum(wn))
        value.append(w1 / wt)
        if depth >= max_depth or len(idx) < min_samples_split or w1 == 0.0 or w1 == wt:
            continue
        feats = np.sort(rng.choice(d, size=n_feat, replace=False)).astype(np.int64)
        f, t, gain = splitter(X, y, w, idx, feats)
        if f < 0:
            continue
        feature[node] = int(f)
        threshold[node] = float(t)
        importances[f] += gain
        go_left = X[idx, f] <= t
        # push right first so the left child is numbered next
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        importances,
    )


def normalized_importances(trees) -> np.ndarray:
    """Per-tree normalised impurity decrease, averaged over trees, renormalised to sum 1."""
    d = len(trees[0].importances)
    acc = np.zeros(d)
    for tree in trees:
        total = tree.importances.sum()
        if total > 0:
            acc += tree.importances / total
    total = acc.sum()
    if total <= 0:
        log.warning("no tree found any informative split; reporting uniform importances")
        return np.full(d, 1.0 / d)
    return acc / total


def fit_random_forest(features, labels, config: ForestConfig = ForestConfig(), seed: int = 42,
                      ucs_checksum: str | None = None, splitter=None) -> TransferModel:
    X, y = check_training_data(features, labels)
    Xs = np.ascontiguousarray(X * FEATURE_SCALE)
    n, d = Xs.shape
    cw = balanced_weights(y) if config.class_weight == "balanced" else np.ones(n)
    n_feat = _n_features(config.max_features, d)
    seeds = np.random.SeedSequence(seed).spawn(config.n_trees)
    trees = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        if config.bootstrap:
            counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            counts = np.ones(n)
        trees.append(build_tree(Xs, y, cw * counts, config.max_depth, n_feat, rng,
                                config.min_samples_split, splitter))
    imp = normalized_importances(trees)
    offsets = np.cumsum([0] + [len(t.feature) for t in trees]).astype(np.int64)
    params = {
        "offsets": offsets,
        "feature": np.concatenate([t.feature for t in trees]),
        "threshold": np.concatenate([t.threshold for t in trees]),
        "left": np.concatenate([t.left for t in trees]),
        "right": np.concatenate([t.right for t in trees]),
        "value": np.concatenate([t.value for t in trees]),
        "importances": imp,
    }
    return TransferModel(
        variant="random_forest",
        params=params,
        input_dim=d,
        seed=seed,
        ucs_checksum=ucs_checksum,
        training_metadata={
            "hyperparameters": asdict(config),
            "n_samples": n,
            "n_nodes": int(offsets[-1]),
        },
    )


def trees_of(params) -> list[tuple]:
    off = params["offsets"]
    out = []
    for a, b in zip(off[:-1], off[1:]):
        out.append(tuple(np.ascontiguousarray(params[k][a:b])
                         for k in ("feature", "threshold", "left", "right", "value")))
    return out


def proba(params, Xs):
    Xs = np.ascontiguousarray(Xs, dtype=np.float64)
    trees = trees_of(params)
    acc = np.zeros(Xs.shape[0])
    for tree in trees:
        acc += _kernels.apply_tree(Xs, *tree)
    return acc / len(trees)


def feature_importances(model: TransferModel) -> np.ndarray:
    return np.asarray(model.params["importances"], dtype=np.float64)
