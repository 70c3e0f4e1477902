"""Shared trainer/predictor contract for the five classifiers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import BadHyperparam, CatalogMismatch, NonFiniteFeature, SingleClassTraining
from ..features import FeatureMatrix

ALGORITHMS = ("glm", "svm", "gbm", "drf", "mlp")
FORMAT_VERSION = 1

# per-algorithm defaults; (default, validator)
_pos_int = (lambda v: isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v > 0, "a positive integer")
_nonneg_int = (lambda v: isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= 0,
               "a non-negative integer")
_pos = (lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0, "a positive number")
_nonneg = (lambda v: isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0, "a non-negative number")
_unit = (lambda v: isinstance(v, (int, float)) and 0 < v <= 1, "a number in (0, 1]")
_layers = (lambda v: isinstance(v, (list, tuple)) and len(v) > 0 and all(_pos_int[0](x) for x in v),
           "a non-empty list of positive integers")

HYPERPARAMS = {
    "glm": {"l2": (1e-3, _nonneg), "learning_rate": (0.1, _pos), "epochs": (500, _pos_int),
            "patience": (20, _pos_int)},
    "svm": {"C": (1.0, _pos), "epochs": (50, _pos_int), "batch_size": (32, _pos_int)},
    "gbm": {"n_trees": (100, _pos_int), "max_depth": (3, _pos_int), "learning_rate": (0.1, _pos),
            "min_samples_leaf": (1, _pos_int)},
    "drf": {"n_trees": (100, _pos_int), "max_depth": (12, _pos_int), "max_features": ("sqrt", None),
            "min_samples_leaf": (1, _pos_int), "bootstrap": (True, None)},
    "mlp": {"hidden": ([64, 32], _layers), "learning_rate": (1e-3, _pos), "batch_size": (32, _pos_int),
            "epochs": (200, _pos_int), "patience": (10, _pos_int), "l2": (0.0, _nonneg)},
}


def resolve_hyperparams(algorithm: str, given: Optional[dict]) -> dict:
    if algorithm not in HYPERPARAMS:
        raise BadHyperparam(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    spec = HYPERPARAMS[algorithm]
    given = dict(given or {})
    unknown = set(given) - set(spec)
    if unknown:
        raise BadHyperparam(f"{algorithm}: unknown hyperparameters {sorted(unknown)}")
    out = {}
    for key, (default, check) in spec.items():
        value = given.get(key, default)
        if check is not None and not check[0](value):
            raise BadHyperparam(f"{algorithm}.{key} must be {check[1]}, got {value!r}")
        out[key] = list(value) if isinstance(value, tuple) else value
    if algorithm == "drf":
        mf = out["max_features"]
        if not (mf in ("sqrt", "all") or (_pos_int[0](mf))):
            raise BadHyperparam(f"drf.max_features must be 'sqrt', 'all' or a positive integer, got {mf!r}")
        if not isinstance(out["bootstrap"], bool):
            raise BadHyperparam("drf.bootstrap must be a boolean")
    return out


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0
    standardize: Optional[bool] = None  # None: on for glm/svm/mlp, off for trees

    @property
    def uses_standardization(self) -> bool:
        if self.standardize is not None:
            return self.standardize
        return self.algorithm in ("glm", "svm", "mlp")


@dataclass
class TrainedModel:
    algorithm: str
    hyperparams: dict
    catalog_fingerprint: str
    feature_names: list
    parameters: dict
    standardization: Optional[dict] = None
    seed: int = 0
    info: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format_version": FORMAT_VERSION,
            "algorithm": self.algorithm,
            "hyperparams": self.hyperparams,
            "catalog_fingerprint": self.catalog_fingerprint,
            "feature_names": self.feature_names,
            "seed": self.seed,
            "parameters": _encode(self.parameters),
            "standardization": _encode(self.standardization),
            "info": _encode(self.info),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        return cls(doc["algorithm"], doc["hyperparams"], doc["catalog_fingerprint"], doc["feature_names"],
                   _decode(doc["parameters"]), _decode(doc["standardization"]), doc["seed"],
                   _decode(doc["info"]))


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def check_finite(X: np.ndarray, what: str):
    if not np.all(np.isfinite(X)):
        rows, cols = np.nonzero(~np.isfinite(X))
        raise NonFiniteFeature(f"{what}: non-finite value at row {rows[0]}, column {cols[0]}")


def standardization_stats(X: np.ndarray) -> dict:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return {"mean": mean, "std": std}


def apply_standardization(X: np.ndarray, stats: Optional[dict]) -> np.ndarray:
    if stats is None:
        return X
    return (X - stats["mean"]) / stats["std"]


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def train(cfg: TrainConfig, train_data: FeatureMatrix, valid: Optional[FeatureMatrix] = None) -> TrainedModel:
    """Fit ``cfg.algorithm`` on ``train_data``; ``valid`` only steers early stopping/calibration."""
    from . import linear, mlp, trees

    hp = resolve_hyperparams(cfg.algorithm, cfg.hyperparams)
    if len(train_data) == 0:
        raise SingleClassTraining("training set is empty")
    y = train_data.labels.astype(np.float64)
    if len(np.unique(y)) < 2:
        raise SingleClassTraining(f"training labels contain a single class ({int(y[0])})")
    check_finite(train_data.X, "train")
    if valid is not None and len(valid) == 0:
        valid = None
    if valid is not None:
        if valid.catalog.fingerprint != train_data.catalog.fingerprint:
            raise CatalogMismatch("validation matrix uses a different catalog than the training matrix")
        check_finite(valid.X, "valid")

    stats = standardization_stats(train_data.X) if cfg.uses_standardization else None
    Xtr = apply_standardization(train_data.X, stats)
    Xva = apply_standardization(valid.X, stats) if valid is not None else None
    yva = valid.labels.astype(np.float64) if valid is not None else None

    fit = {"glm": linear.fit_glm, "svm": linear.fit_svm, "gbm": trees.fit_gbm,
           "drf": trees.fit_drf, "mlp": mlp.fit_mlp}[cfg.algorithm]
    params, info = fit(Xtr, y, Xva, yva, hp, cfg.seed)
    return TrainedModel(cfg.algorithm, hp, train_data.catalog.fingerprint, list(train_data.catalog.names),
                        params, stats, int(cfg.seed), info)


def decision_input(m: TrainedModel, x: FeatureMatrix) -> np.ndarray:
    if x.catalog.fingerprint != m.catalog_fingerprint:
        raise CatalogMismatch(
            f"model expects catalog {m.catalog_fingerprint}, matrix has {x.catalog.fingerprint}"
        )
    check_finite(x.X, "predict")
    return apply_standardization(x.X, m.standardization)


def predict_proba(m: TrainedModel, x: FeatureMatrix) -> np.ndarray:
    from . import linear, mlp, trees

    X = decision_input(m, x)
    if len(X) == 0:
        return np.zeros(0)
    fn = {"glm": linear.proba_glm, "svm": linear.proba_svm, "gbm": trees.proba_gbm,
          "drf": trees.proba_drf, "mlp": mlp.proba_mlp}[m.algorithm]
    return np.clip(fn(m.parameters, X), 0.0, 1.0)


def predict_label(m: TrainedModel, x: FeatureMatrix, threshold: float = 0.5) -> np.ndarray:
    """1 where the malicious probability is at least ``threshold``."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (predict_proba(m, x) >= threshold).astype(np.int64)
