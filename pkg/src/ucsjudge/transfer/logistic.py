"""L2-regularised logistic regression fitted by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .model import FEATURE_SCALE, TransferModel, balanced_weights, check_training_data


@dataclass(frozen=True)
class LogisticConfig:
    C: float = 0.1
    max_iter: int = 2000
    tol: float = 1e-6
    class_weight: str | None = "balanced"


def fit_logistic(features, labels, config: LogisticConfig = LogisticConfig(), seed: int | None = None,
                 ucs_checksum: str | None = None) -> TransferModel:
    """Minimise (1/N) [sum_i w_i * logloss_i + ||coef||^2 / (2C)]; the intercept is unpenalised.

    The step size is 1/L with L the exact Lipschitz constant of the
    gradient, so the iteration is monotone and seed-free.
    """
    X, y = check_training_data(features, labels)
    Xs = X * FEATURE_SCALE
    n, d = Xs.shape
    sw = balanced_weights(y) if config.class_weight == "balanced" else np.ones(n)
    A = np.hstack([Xs, np.ones((n, 1))])
    reg = np.full(d + 1, 1.0 / config.C)
    reg[-1] = 0.0
    hess_bound = 0.25 * (A.T * sw) @ A / n + np.diag(reg) / n
    step = 1.0 / np.linalg.eigvalsh(hess_bound)[-1]

    theta = np.zeros(d + 1)
    trace = []
    grad_norm = np.inf
    it = 0
    for it in range(1, config.max_iter + 1):
        z = A @ theta
        p = expit(z)
        grad = A.T @ (sw * (p - y)) / n + reg * theta / n
        grad_norm = float(np.linalg.norm(grad))
        if it % 50 == 1:
            trace.append(_objective(z, y, sw, theta, reg, n))
        if grad_norm < config.tol:
            break
        theta = theta - step * grad
    return TransferModel(
        variant="logreg",
        params={"coef": theta[:-1].copy(), "intercept": float(theta[-1])},
        input_dim=d,
        seed=seed,
        ucs_checksum=ucs_checksum,
        training_metadata={
            "hyperparameters": asdict(config),
            "n_samples": n,
            "n_iter": it,
            "final_grad_norm": grad_norm,
            "loss_trace": trace,
        },
    )


def _objective(z, y, sw, theta, reg, n):
    # log(1 + e^z) - y z, computed stably
    ll = np.logaddexp(0.0, z) - y * z
    return float((sw @ ll + 0.5 * reg @ (theta * theta)) / n)


def proba(params, Xs):
    return expit(Xs @ params["coef"] + params["intercept"])
