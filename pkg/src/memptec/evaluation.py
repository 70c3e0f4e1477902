"""Confusion counts, the metric suite and mean +/- standard-error aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch

METRIC_NAMES = ("precision", "recall", "f1", "accuracy", "mse", "rmse", "fp", "fn")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricSet:
    precision: float
    recall: float
    f1: float
    accuracy: float
    mse: float
    rmse: float
    fp: int
    fn: int

    def as_dict(self) -> dict:
        return asdict(self)


def _check_lengths(a, b):
    if len(a) != len(b):
        raise LengthMismatch(f"length mismatch: {len(a)} predictions vs {len(b)} labels")
    if len(a) == 0:
        raise LengthMismatch("cannot evaluate zero rows")


def confusion(pred: Sequence[int], truth: Sequence[int]) -> ConfusionCounts:
    """Counts with label 1 (malicious) as the positive class."""
    pred = np.asarray(pred).astype(np.int64)
    truth = np.asarray(truth).astype(np.int64)
    _check_lengths(pred, truth)
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    return ConfusionCounts(tp, fp, fn, tn)


def from_confusion(c: ConfusionCounts, mse: float) -> MetricSet:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (c.tp + c.tn) / c.n
    return MetricSet(precision, recall, f1, accuracy, mse, math.sqrt(mse), c.fp, c.fn)


def metrics(proba: Sequence[float], truth: Sequence[int], threshold: float = 0.5) -> MetricSet:
    """Metric suite for probabilities; labels are ``proba >= threshold``.

    Squared error is measured on the probabilities, not the hard labels.
    """
    proba = np.asarray(proba, dtype=np.float64)
    truth = np.asarray(truth).astype(np.int64)
    _check_lengths(proba, truth)
    if np.any((proba < 0) | (proba > 1)) or not np.all(np.isfinite(proba)):
        raise ValueError("probabilities must lie in [0, 1]")
    c = confusion((proba >= threshold).astype(np.int64), truth)
    mse = float(np.mean((proba - truth) ** 2))
    return from_confusion(c, mse)


def aggregate(runs: Sequence[MetricSet]) -> dict:
    """metric -> {mean, standard_error}; the error is sample std / sqrt(k)."""
    if not runs:
        raise ValueError("no runs to aggregate")
    k = len(runs)
    if k == 1:
        warnings.warn("aggregating a single run; standard errors are reported as 0")
    out = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(r, name) for r in runs], dtype=np.float64)
        se = float(vals.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        out[name] = {"mean": float(vals.mean()), "standard_error": se}
    return out


@dataclass
class Report:
    dataset: str
    feature_set: str
    algorithm: str
    folds: list
    n_features: int = 0

    @property
    def mean_se(self) -> dict:
        return aggregate(self.folds)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "feature_set": self.feature_set,
            "algorithm": self.algorithm,
            "n_features": self.n_features,
            "folds": [f.as_dict() for f in self.folds],
            "mean_se": self.mean_se,
        }


def reports_to_json(reports: Sequence[Report], header: dict = None) -> str:
    doc = {"reports": [r.to_dict() for r in reports]}
    if header:
        doc = {**header, **doc}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports: Sequence[Report], header_lines: Sequence[str] = ()) -> str:
    """One row per (report, fold) plus a ``mean`` and ``se`` row per report."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "feature_set", "algorithm", "n_features", "fold", *METRIC_NAMES])
    for r in reports:
        key = [r.dataset, r.feature_set, r.algorithm, r.n_features]
        for i, f in enumerate(r.folds):
            w.writerow(key + [i] + [_fmt(getattr(f, m)) for m in METRIC_NAMES])
        agg = r.mean_se
        w.writerow(key + ["mean"] + [_fmt(agg[m]["mean"]) for m in METRIC_NAMES])
        w.writerow(key + ["se"] + [_fmt(agg[m]["standard_error"]) for m in METRIC_NAMES])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6f}"
