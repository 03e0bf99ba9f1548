"""One-hidden-layer perceptron (ReLU, logistic output) trained with full-batch Adam."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, DivergenceError
from .model import FEATURE_SCALE, TransferModel, check_training_data


@dataclass(frozen=True)
class MLPConfig:
    hidden_units: int = 32
    learning_rate: float = 0.01
    max_iter: int = 2000
    alpha: float = 1e-4  # L2 penalty on weights
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    tol: float = 1e-4
    n_iter_no_change: int = 10


def _glorot(rng, fan_in, fan_out, factor):
    bound = np.sqrt(factor / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)


def fit_mlp(features, labels, config: MLPConfig = MLPConfig(), seed: int = 42,
            ucs_checksum: str | None = None) -> TransferModel:
    if config.hidden_units < 1:
        raise ConfigError(f"hidden_units must be >= 1, got {config.hidden_units}")
    X, y = check_training_data(features, labels)
    Xs = X * FEATURE_SCALE
    n, d = Xs.shape
    h = config.hidden_units
    rng = np.random.default_rng(seed)
    W1, b1 = _glorot(rng, d, h, 6.0)
    W2, b2 = _glorot(rng, h, 1, 2.0)
    params = [W1, b1, W2, b2]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    yc = y[:, None].astype(np.float64)

    trace = []
    best = np.inf
    stall = 0
    it = 0
    for it in range(1, config.max_iter + 1):
        W1, b1, W2, b2 = params
        pre = Xs @ W1 + b1
        hid = np.maximum(pre, 0.0)
        z = hid @ W2 + b2
        p = expit(z)
        loss = float(np.mean(np.logaddexp(0.0, z) - yc * z)
                     + 0.5 * config.alpha * (np.sum(W1 * W1) + np.sum(W2 * W2)) / n)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at iteration {it}", trace=trace)
        trace.append(loss)

        delta = (p - yc) / n
        gW2 = hid.T @ delta + config.alpha * W2 / n
        gb2 = delta.sum(axis=0)
        dh = (delta @ W2.T) * (pre > 0)
        gW1 = Xs.T @ dh + config.alpha * W1 / n
        gb1 = dh.sum(axis=0)
        grads = [gW1, gb1, gW2, gb2]

        lr_t = config.learning_rate * np.sqrt(1 - config.beta2 ** it) / (1 - config.beta1 ** it)
        for i, g in enumerate(grads):
            m[i] = config.beta1 * m[i] + (1 - config.beta1) * g
            v[i] = config.beta2 * v[i] + (1 - config.beta2) * g * g
            params[i] = params[i] - lr_t * m[i] / (np.sqrt(v[i]) + config.epsilon)

        if loss > best - config.tol:
            stall += 1
        else:
            stall = 0
        best = min(best, loss)
        if stall > config.n_iter_no_change:
            break

    W1, b1, W2, b2 = params
    return TransferModel(
        variant="mlp",
        params={"W1": W1, "b1": b1, "W2": W2[:, 0].copy(), "b2": float(b2[0])},
        input_dim=d,
        seed=seed,
        ucs_checksum=ucs_checksum,
        training_metadata={
            "hyperparameters": asdict(config),
            "n_samples": n,
            "n_iter": it,
            "loss_trace": trace,
        },
    )


def proba(params, Xs):
    hid = np.maximum(Xs @ params["W1"] + params["b1"], 0.0)
    return expit(hid @ params["W2"] + params["b2"])
