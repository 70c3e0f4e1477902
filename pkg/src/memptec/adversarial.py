"""Feature importance ranking and adversarial manipulation of malicious rows.

Every attack works on a copy of the feature matrix, edits only rows labelled
malicious, and scores the model against the original labels. Replacement
values are drawn from actual benign rows (empirical resampling). The draw for
a feature is keyed on (seed, feature), so two attacks that manipulate the
same feature with the same seed write the same values.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .catalog import (
    CCS_FEATURES,
    INTERACTION_FEATURES,
    STAKEHOLDER_ROLES,
    TEMPORAL_FEATURES,
    catalog as canonical_catalog,
)
from .errors import EmptyPool, IncompleteGrouping, TooManyFeaturesForExact, UnknownFeature
from .evaluation import MetricSet, metrics
from .features import FeatureMatrix, ccs
from .models import TrainedModel, predict_label, predict_proba

MAX_EXACT_FEATURES = 12
_KEY_INDEX = {name: i for i, name in enumerate(canonical_catalog(include_special_char=True).names)}


def _feature_key(name: str) -> int:
    # stable across catalog subsets, so seeds mean the same thing everywhere
    return _KEY_INDEX.get(name, sum(name.encode()) + 10_000)


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & (2**63 - 1), *keys])


# -- ranking ----------------------------------------------------------------

@dataclass(frozen=True)
class ImportanceRanking:
    entries: tuple  # ((name, score), ...) sorted by score desc, ties in catalog order
    method: str
    seed: int
    raw_scores: dict = field(default_factory=dict)

    @property
    def names(self) -> list:
        return [n for n, _ in self.entries]

    @property
    def scores(self) -> dict:
        return dict(self.entries)

    def top(self, k: int) -> list:
        return self.names[:k]


def _accuracy(m: TrainedModel, x: FeatureMatrix) -> float:
    return float(np.mean(predict_label(m, x) == x.labels))


def _ordered(cat_names, scores: dict) -> tuple:
    order = sorted(range(len(cat_names)), key=lambda i: (-scores[cat_names[i]], i))
    return tuple((cat_names[i], scores[cat_names[i]]) for i in order)


def permutation_importance(m: TrainedModel, x: FeatureMatrix, seed: int, repeats: int = 10) -> dict:
    """Mean accuracy drop when one column is shuffled, ``repeats`` times per feature."""
    base = _accuracy(m, x)
    out = {}
    for j, name in enumerate(x.catalog.names):
        rng = _rng(seed, _feature_key(name))
        drops = []
        for _ in range(repeats):
            X = x.X.copy()
            X[:, j] = X[rng.permutation(len(X)), j]
            drops.append(base - _accuracy(m, x.with_values(X)))
        out[name] = float(np.mean(drops))
    return out


def coalition_value(m: TrainedModel, x: FeatureMatrix, members: Sequence[int], perms: list) -> float:
    """Accuracy with every column outside ``members`` replaced by a shuffled copy,
    averaged over the fixed permutations in ``perms`` (one row order per repeat and column)."""
    keep = set(members)
    accs = []
    for perm in perms:
        X = x.X.copy()
        for j in range(X.shape[1]):
            if j not in keep:
                X[:, j] = x.X[perm[j], j]
        accs.append(_accuracy(m, x.with_values(X)))
    return float(np.mean(accs))


def exact_shapley(m: TrainedModel, x: FeatureMatrix, seed: int, repeats: int = 10) -> dict:
    """Shapley values of accuracy by enumerating every feature coalition."""
    F = len(x.catalog)
    if F > MAX_EXACT_FEATURES:
        raise TooManyFeaturesForExact(f"exact Shapley supports at most {MAX_EXACT_FEATURES} features, got {F}")
    rng = _rng(seed)
    perms = [[rng.permutation(len(x)) for _ in range(F)] for _ in range(repeats)]
    value = {}
    for size in range(F + 1):
        for S in combinations(range(F), size):
            value[S] = _accuracy(m, x) if size == F else coalition_value(m, x, S, perms)
    weights = [math.factorial(s) * math.factorial(F - s - 1) / math.factorial(F) for s in range(F)]
    phi = {}
    for j, name in enumerate(x.catalog.names):
        total = 0.0
        for S, v in value.items():
            if j in S:
                continue
            with_j = tuple(sorted(S + (j,)))
            total += weights[len(S)] * (value[with_j] - v)
        phi[name] = total
    phi["__empty__"] = value[()]
    phi["__full__"] = value[tuple(range(F))]
    return phi


def rank_features(m: TrainedModel, x: FeatureMatrix, method: str = "permutation", seed: int = 0,
                  repeats: int = 10) -> ImportanceRanking:
    if len(x) == 0:
        raise ValueError("cannot rank features on an empty matrix")
    if method == "permutation":
        raw = permutation_importance(m, x, seed, repeats)
    elif method == "exact_shapley":
        raw = exact_shapley(m, x, seed, repeats)
    else:
        raise ValueError(f"unknown ranking method {method!r}")
    names = x.catalog.names
    scores = {n: max(raw[n], 0.0) for n in names}
    return ImportanceRanking(_ordered(names, scores), method, int(seed), raw)


# -- manipulation -----------------------------------------------------------

def _benign_values(pool: FeatureMatrix, feature: str) -> np.ndarray:
    if feature not in pool.catalog:
        raise UnknownFeature(f"feature {feature!r} not in benign pool catalog")
    col = pool.column(feature)[pool.labels == 0]
    if col.size == 0:
        raise EmptyPool("benign pool has no benign rows")
    return col


def _manipulate_inplace(X: np.ndarray, labels: np.ndarray, j: int, feature: str, pool: FeatureMatrix, seed: int):
    values = _benign_values(pool, feature)
    mal = np.flatnonzero(labels == 1)
    draw = _rng(seed, _feature_key(feature)).integers(0, len(values), size=len(mal))
    X[mal, j] = values[draw]


def manipulate_feature(x: FeatureMatrix, feature: str, benign_pool: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Replace ``feature`` on malicious rows by values of randomly drawn benign rows."""
    j = x.catalog.index(feature)
    out = x.copy()
    _manipulate_inplace(out.X, out.labels, j, feature, benign_pool, seed)
    return out


@dataclass(frozen=True)
class AttackStep:
    step_id: str
    manipulated: tuple
    metrics: MetricSet


@dataclass
class AttackCurve:
    steps: list
    baseline: MetricSet
    attack_kind: str = ""
    model: str = ""
    feature_set: str = ""

    @property
    def final(self) -> MetricSet:
        return self.steps[-1].metrics


Observer = Optional[Callable[[str, FeatureMatrix], None]]


def _score(m, x: FeatureMatrix, labels) -> MetricSet:
    return metrics(predict_proba(m, x), labels)


def _start(m, test: FeatureMatrix, kind: str, observer: Observer):
    base = _score(m, test, test.labels)
    if observer:
        observer("baseline", test)
    return AttackCurve([AttackStep("baseline", (), base)], base, kind, m.algorithm)


def _cumulative_attack(m, test, benign_pool, stages, seed, kind, observer):
    """``stages``: list of (step_id, feature names added at that step)."""
    curve = _start(m, test, kind, observer)
    work = test.copy()
    done: list = []
    for step_id, added in stages:
        for name in added:
            if name in done:
                continue
            _manipulate_inplace(work.X, work.labels, work.catalog.index(name), name, benign_pool, seed)
            done.append(name)
        if observer:
            observer(step_id, work)
        curve.steps.append(AttackStep(step_id, tuple(done), _score(m, work, test.labels)))
    return curve


def n_for_fraction(fraction: float, n_features: int) -> int:
    return min(n_features, math.ceil(fraction * n_features - 1e-9))


def attack_percentage(m, test: FeatureMatrix, benign_pool: FeatureMatrix, ranking: ImportanceRanking,
                      steps: Sequence[float], seed: int, observer: Observer = None) -> AttackCurve:
    """At fraction f the top ceil(f * F) ranked features are manipulated (cumulatively)."""
    steps = list(steps)
    if not steps or any(not 0 < f <= 1 for f in steps) or any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("fractions must be strictly ascending within (0, 1]")
    order = ranking.names
    F = len(order)
    stages = []
    prev = 0
    for f in steps:
        k = n_for_fraction(f, F)
        stages.append((f"{round(f * 100, 6):g}%", order[prev:k]))
        prev = max(prev, k)
    return _cumulative_attack(m, test, benign_pool, stages, seed, "percentage", observer)


def attack_topn(m, test: FeatureMatrix, benign_pool: FeatureMatrix, ranking: ImportanceRanking,
                n_max: int = 10, seed: int = 0, observer: Observer = None) -> AttackCurve:
    order = ranking.names
    if not 1 <= n_max <= len(order):
        raise ValueError(f"n_max must lie in [1, {len(order)}], got {n_max}")
    stages = [(f"top{n}", [order[n - 1]]) for n in range(1, n_max + 1)]
    return _cumulative_attack(m, test, benign_pool, stages, seed, "topn", observer)


def group_order(grouping: dict, ranking: ImportanceRanking, cat_names: Sequence[str]) -> list:
    """Groups restricted to ``cat_names``, by summed importance (desc), ties by first member."""
    seen: dict = {}
    groups = {}
    for key, members in grouping.items():
        kept = [n for n in members if n in cat_names]
        for n in kept:
            if n in seen:
                raise IncompleteGrouping(f"feature {n!r} appears in groups {seen[n]!r} and {key!r}")
            seen[n] = key
        if kept:
            groups[key] = kept
    missing = [n for n in cat_names if n not in seen]
    if missing:
        raise IncompleteGrouping(f"grouping does not cover {missing}")
    scores = ranking.scores
    pos = {n: i for i, n in enumerate(cat_names)}
    return sorted(groups.items(),
                  key=lambda kv: (-sum(scores[n] for n in kv[1]), min(pos[n] for n in kv[1])))


def attack_information(m, test: FeatureMatrix, benign_pool: FeatureMatrix, grouping: dict,
                       ranking: ImportanceRanking, seed: int = 0, observer: Observer = None) -> AttackCurve:
    """Manipulate whole information groups, most important group first."""
    ordered = group_order(grouping, ranking, test.catalog.names)
    stages = [(key, [n for n in test.catalog.names if n in members]) for key, members in ordered]
    return _cumulative_attack(m, test, benign_pool, stages, seed, "information", observer)


# -- drift ------------------------------------------------------------------

def _check_schedule(schedule):
    schedule = list(schedule)
    if any(s < 0 for s in schedule) or any(b < a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be non-negative and ascending")
    return schedule


def shift_temporal(x: FeatureMatrix, days: float, ccs_base: float = 2) -> FeatureMatrix:
    """Malicious rows aged by ``days``: every temporal feature + days, CCS recomputed."""
    out = x.copy()
    if days == 0:
        return out
    mal = out.labels == 1
    names = out.catalog.names
    X = out.X
    for name in TEMPORAL_FEATURES:
        if name in names:
            X[mal, names.index(name)] += days
    for role in STAKEHOLDER_ROLES:
        score = f"{role}_CCS"
        if score not in names:
            continue
        j = names.index(score)
        svc, cpn = f"{role}_service_time", f"{role}_CPN"
        old_ccs = x.X[mal, j]
        if svc in names:
            old_s = x.X[mal, names.index(svc)]
        else:
            old_s = None
        if cpn in names:
            c = x.X[mal, names.index(cpn)]
        elif old_s is not None:
            # recover the package count from the unshifted score
            with np.errstate(divide="ignore", invalid="ignore"):
                c = np.where(old_s > 0, np.power(ccs_base, old_ccs / (np.log1p(old_s) / math.log(ccs_base))) - 1, 0.0)
        else:
            warnings.warn(f"{score}: neither service time nor CPN available; score left unchanged")
            continue
        if old_s is None:
            with np.errstate(divide="ignore", invalid="ignore"):
                log_c = np.log1p(c) / math.log(ccs_base)
                old_s = np.where(c > 0, np.power(ccs_base, old_ccs / log_c) - 1, 0.0)
        X[mal, j] = ccs(np.maximum(old_s + days, 0), np.maximum(c, 0), ccs_base)
    return out


def shift_interactions(x: FeatureMatrix, count: float) -> FeatureMatrix:
    out = x.copy()
    mal = out.labels == 1
    for name in INTERACTION_FEATURES:
        if name in out.catalog:
            out.X[mal, out.catalog.index(name)] += count
    return out


def _drift(m, test, schedule, shift, touched, kind, observer, label):
    curve = _start(m, test, kind, observer)
    for v in _check_schedule(schedule):
        work = shift(test, v)
        if observer:
            observer(f"{label}{v:g}", work)
        manipulated = tuple(touched) if v > 0 else ()
        curve.steps.append(AttackStep(f"{label}{v:g}", manipulated, _score(m, work, test.labels)))
    return curve


def drift_temporal(m, test: FeatureMatrix, day_schedule: Sequence[int], ccs_base: float = 2,
                   observer: Observer = None) -> AttackCurve:
    names = test.catalog.names
    touched = [n for n in names if n in TEMPORAL_FEATURES or n in CCS_FEATURES]
    return _drift(m, test, day_schedule, lambda x, d: shift_temporal(x, d, ccs_base), touched,
                  "drift_temporal", observer, "d")


def drift_interaction(m, test: FeatureMatrix, count_schedule: Sequence[int], observer: Observer = None) -> AttackCurve:
    touched = [n for n in test.catalog.names if n in INTERACTION_FEATURES]
    return _drift(m, test, count_schedule, shift_interactions, touched, "drift_interaction", observer, "c")


CURVE_COLUMNS = ("model", "feature_set", "attack_kind", "step_id", "manipulated_count",
                 "precision", "recall", "f1", "accuracy", "rmse", "fp", "fn")


def curves_to_csv(curves: Sequence[AttackCurve], header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for c in curves:
        for s in c.steps:
            mt = s.metrics
            w.writerow([c.model, c.feature_set, c.attack_kind, s.step_id, len(s.manipulated),
                        f"{mt.precision:.6f}", f"{mt.recall:.6f}", f"{mt.f1:.6f}", f"{mt.accuracy:.6f}",
                        f"{mt.rmse:.6f}", mt.fp, mt.fn])
    return buf.getvalue()
