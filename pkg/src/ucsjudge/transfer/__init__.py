"""Stage 3: lightweight transfer classifiers and LLM-side verdicts."""

from .forest import ForestConfig, feature_importances, fit_random_forest
from .knn import KNNConfig, fit_knn
from .llm import llm_aggregate, zero_shot_judge
from .logistic import LogisticConfig, fit_logistic
from .mlp import MLPConfig, fit_mlp
from .model import (
    VARIANTS,
    TransferModel,
    Verdict,
    labels_from_proba,
    load_model,
    predict,
    predict_many,
    predict_proba,
    save_model,
)


def fit(variant: str, features, labels, seed: int = 42, ucs_checksum=None, sample_ids=None,
        config=None) -> TransferModel:
    """Fit any transfer variant with its default hyperparameters."""
    if variant == "logreg":
        return fit_logistic(features, labels, config or LogisticConfig(), seed=seed, ucs_checksum=ucs_checksum)
    if variant == "mlp":
        return fit_mlp(features, labels, config or MLPConfig(), seed=seed, ucs_checksum=ucs_checksum)
    if variant == "random_forest":
        return fit_random_forest(features, labels, config or ForestConfig(), seed=seed, ucs_checksum=ucs_checksum)
    if variant == "knn":
        return fit_knn(features, labels, config or KNNConfig(), sample_ids=sample_ids, seed=seed,
                       ucs_checksum=ucs_checksum)
    raise ValueError(f"unknown transfer variant {variant!r}; choose from {VARIANTS}")


__all__ = [
    "VARIANTS", "ForestConfig", "KNNConfig", "LogisticConfig", "MLPConfig", "TransferModel",
    "Verdict", "feature_importances", "fit", "fit_knn", "fit_logistic", "fit_mlp",
    "fit_random_forest", "labels_from_proba", "llm_aggregate", "load_model", "predict",
    "predict_many", "predict_proba", "save_model", "zero_shot_judge",
]
