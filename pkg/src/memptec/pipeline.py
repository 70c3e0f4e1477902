"""Train/evaluate/attack grids shared by the command line and the test suite.

Every (feature set, algorithm, fold) task derives its own seed from the run
seed, so results do not depend on execution order or on the worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import adversarial as adv
from .catalog import default_grouping, subset
from .dataset import SplitIndices, apply_split
from .evaluation import Report, metrics
from .features import FeatureMatrix
from .models import ALGORITHMS, TrainConfig, TrainedModel, predict_proba, train

FEATURE_SET_LABELS = {
    "existing_tec": "Existing_tec",
    "memptec_e": "MeMPtec_E",
    "memptec_d": "MeMPtec_D",
    "memptec": "MeMPtec",
}


def derive_seed(seed: int, *keys) -> int:
    """Child seed for a task identified by ``keys`` (ints or strings)."""
    ints = [int(seed) & (2**63 - 1)]
    for k in keys:
        if isinstance(k, int):
            ints.append(k)
        else:
            ints.append(int.from_bytes(hashlib.sha256(str(k).encode()).digest()[:8], "little"))
    return int(np.random.SeedSequence(ints).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass(frozen=True)
class Task:
    feature_set: str
    algorithm: str
    fold: int


def _fit_task(args):
    X, y, cat, indices, task, hyperparams, seed = args
    fm = FeatureMatrix(X, y, cat)
    sp = apply_split(fm, indices)
    cfg = TrainConfig(task.algorithm, hyperparams.get(task.algorithm, {}),
                      derive_seed(seed, task.feature_set, task.algorithm, task.fold))
    model = train(cfg, sp.train, sp.valid)
    m = metrics(predict_proba(model, sp.test), sp.test.labels)
    return task, model, m


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def feature_matrix_for(fm: FeatureMatrix, feature_set: str, existing_tec=None) -> FeatureMatrix:
    kw = {"existing_tec": existing_tec} if existing_tec else {}
    return fm.select(subset(fm.catalog, feature_set, **kw))


def run_grid(fm: FeatureMatrix, splits: Sequence[SplitIndices], feature_sets: Sequence[str],
             algorithms: Sequence[str] = ALGORITHMS, hyperparams: Optional[dict] = None, seed: int = 0,
             jobs: int = 1, existing_tec=None) -> dict:
    """Train and test every (feature set, algorithm, fold); returns Task -> (model, MetricSet)."""
    hyperparams = hyperparams or {}
    args = []
    for fs in feature_sets:
        sub = feature_matrix_for(fm, fs, existing_tec)
        for alg in algorithms:
            for fold, idx in enumerate(splits):
                args.append((sub.X, sub.labels, sub.catalog, idx, Task(fs, alg, fold), hyperparams, seed))
    results = _map(_fit_task, args, jobs)
    return {task: (model, m) for task, model, m in results}


def reports_from_grid(grid: dict, dataset: str, catalogs: dict) -> list:
    """One :class:`Report` per (feature set, algorithm), folds in order."""
    keys = sorted({(t.feature_set, t.algorithm) for t in grid},
                  key=lambda k: (list(FEATURE_SET_LABELS).index(k[0]) if k[0] in FEATURE_SET_LABELS else 99,
                                 ALGORITHMS.index(k[1])))
    out = []
    for fs, alg in keys:
        folds = [grid[t][1] for t in sorted((t for t in grid if (t.feature_set, t.algorithm) == (fs, alg)),
                                             key=lambda t: t.fold)]
        out.append(Report(dataset, fs, alg, folds, len(catalogs[fs])))
    return out


@dataclass(frozen=True)
class AttackTask:
    feature_set: str
    algorithm: str
    kind: str


def attack_one(model: TrainedModel, target: FeatureMatrix, pool: FeatureMatrix, kind: str, seed: int,
               ranking_method: str = "permutation", repeats: int = 10, steps=None, n_max: int = 10,
               grouping: Optional[dict] = None, days=None, counts=None) -> adv.AttackCurve:
    if kind == "drift_temporal":
        return adv.drift_temporal(model, target, days if days is not None else [0, 30, 90, 180, 360])
    if kind == "drift_interaction":
        return adv.drift_interaction(model, target, counts if counts is not None else [0, 10, 20, 30, 40, 50])
    ranking = adv.rank_features(model, target, ranking_method, seed, repeats)
    if kind == "percentage":
        return adv.attack_percentage(model, target, pool, ranking,
                                     steps if steps is not None else [i / 10 for i in range(1, 11)], seed)
    if kind == "topn":
        return adv.attack_topn(model, target, pool, ranking, min(n_max, len(target.catalog)), seed)
    if kind == "information":
        return adv.attack_information(model, target, pool, grouping or default_grouping(target.catalog),
                                      ranking, seed)
    raise ValueError(f"unknown attack kind {kind!r}")


def _attack_task(args):
    model, target, pool, task, seed, opts = args
    curve = attack_one(model, target, pool, task.kind, seed, **opts)
    curve.model = task.algorithm
    curve.feature_set = task.feature_set
    return task, curve


def run_attacks(fm: FeatureMatrix, split: SplitIndices, models: dict, kinds: Sequence[str], seed: int = 0,
                jobs: int = 1, attack_all_rows: bool = False, existing_tec=None, **opts) -> list:
    """Attack curves for every model in ``models`` ((feature set, algorithm) -> TrainedModel).

    The benign pool is the training split's benign rows; the target is the
    test split, or every row when ``attack_all_rows`` is set.
    """
    args = []
    for (fs, alg), model in models.items():
        sub = feature_matrix_for(fm, fs, existing_tec)
        sp = apply_split(sub, split)
        target = sub if attack_all_rows else sp.test
        for kind in kinds:
            task = AttackTask(fs, alg, kind)
            args.append((model, target, sp.train, task, derive_seed(seed, "attack", fs, alg, kind), opts))
    results = _map(_attack_task, args, jobs)
    order = {k: i for i, k in enumerate(FEATURE_SET_LABELS)}
    results.sort(key=lambda r: (order.get(r[0].feature_set, 99), ALGORITHMS.index(r[0].algorithm),
                                list(kinds).index(r[0].kind)))
    return [c for _, c in results]
