"""Five binary classifiers behind one train / predict contract."""

from .base import (
    ALGORITHMS,
    HYPERPARAMS,
    TrainConfig,
    TrainedModel,
    predict_label,
    predict_proba,
    resolve_hyperparams,
    train,
)

__all__ = [
    "ALGORITHMS",
    "HYPERPARAMS",
    "TrainConfig",
    "TrainedModel",
    "predict_label",
    "predict_proba",
    "resolve_hyperparams",
    "train",
]
