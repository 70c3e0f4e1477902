"""Gradient boosting (gbm) and random forest (drf) over exact greedy trees.

Trees are stored as flat arrays (feature, threshold, left, right, value);
``feature == -1`` marks a leaf. Rows with ``x[feature] <= threshold`` go
left. Split search is exhaustive over midpoints between consecutive distinct
sorted values; ties go to the lowest feature index, then the lowest
threshold.
"""

from __future__ import annotations

import math

import numpy as np

from .base import log_loss, sigmoid

_MIN_GAIN = 1e-12


class _Presorted:
    """Column-wise argsort of the training matrix, reused by every node."""

    def __init__(self, X):
        self.X = X
        self.order = np.argsort(X, axis=0, kind="stable")

    def node_order(self, mask, feats):
        cols = self.order[:, feats]
        keep = mask[cols]
        m = int(mask.sum())
        return cols.T[keep.T].reshape(len(feats), m)


def _best_split(ps: _Presorted, mask, feats, w, wy, criterion, min_leaf):
    """(gain, feature, threshold) of the best split of the rows in ``mask``, or None."""
    m = int(mask.sum())
    if m < 2:
        return None
    feats = np.sort(np.asarray(feats))
    order = ps.node_order(mask, feats)                    # k x m
    sv = ps.X[order, feats[:, None]]                      # sorted values per feature
    cw = np.cumsum(w[order], axis=1)[:, :-1]
    cwy = np.cumsum(wy[order], axis=1)[:, :-1]
    W = cw[0, -1] + w[order[0, -1]]
    WY = cwy[0, -1] + wy[order[0, -1]]
    rw = W - cw
    rwy = WY - cwy
    ok = (sv[:, :-1] < sv[:, 1:]) & (cw >= min_leaf) & (rw >= min_leaf)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            parent = WY * (W - WY) / W
            child = cwy * (cw - cwy) / cw + rwy * (rw - rwy) / rw
            gain = parent - child
        else:
            gain = cwy ** 2 / cw + rwy ** 2 / rw - WY ** 2 / W
    gain = np.where(ok, gain, -np.inf)
    flat = int(np.argmax(gain))                           # feature-major: lowest index first
    fi, pos = divmod(flat, gain.shape[1])
    best = gain[fi, pos]
    if not best > _MIN_GAIN:
        return None
    lo, hi = sv[fi, pos], sv[fi, pos + 1]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(best), int(feats[fi]), float(thr)


def build_tree(ps: _Presorted, w, target, criterion, max_depth, min_leaf, pick_features, root_mask):
    """Grow one tree depth-first; returns (tree arrays, list of per-leaf row masks)."""
    wy = w * target
    feature, threshold, left, right, value = [], [], [], [], []
    leaf_masks = {}

    def grow(mask, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        wsum = w[mask].sum()
        value.append(float(wy[mask].sum() / wsum) if wsum > 0 else 0.0)
        split = None
        if depth < max_depth:
            split = _best_split(ps, mask, pick_features(), w, wy, criterion, min_leaf)
        if split is None:
            leaf_masks[node] = mask
            return node
        _, f, thr = split
        go_left = ps.X[:, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(mask & go_left, depth + 1)
        right[node] = grow(mask & ~go_left, depth + 1)
        return node

    grow(root_mask, 0)
    tree = {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=np.float64),
    }
    return tree, leaf_masks


def tree_apply(tree, X) -> np.ndarray:
    """Leaf index reached by every row."""
    feature, threshold = tree["feature"], tree["threshold"]
    left, right = tree["left"], tree["right"]
    node = np.zeros(len(X), dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        cur = node[active]
        f = feature[cur]
        go_left = X[active, f] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = active[feature[node[active]] >= 0]
    return node


def tree_predict(tree, X) -> np.ndarray:
    return tree["value"][tree_apply(tree, X)]


# -- gradient boosting ------------------------------------------------------

def _leaf_loss(F, y):
    # sum of logistic losses for raw scores F
    return float(np.sum(np.logaddexp(0.0, F) - y * F))


def fit_gbm(X, y, Xva, yva, hp, seed):
    """Boosted depth-limited regression trees on the logistic-loss residual y - p.

    Leaf values take a Newton step scaled by the learning rate; a leaf whose
    step would raise its own rows' loss is halved until it does not, so the
    training loss never increases from one round to the next.
    """
    n, d = X.shape
    ps = _Presorted(X)
    prior = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    base = math.log(prior / (1 - prior))
    F = np.full(n, base)
    Fva = np.full(len(Xva), base) if Xva is not None else None
    ones = np.ones(n)
    all_feats = np.arange(d)
    root = np.ones(n, dtype=bool)
    trees, train_loss, valid_loss = [], [_leaf_loss(F, y) / n], []
    for _ in range(hp["n_trees"]):
        p = sigmoid(F)
        resid = y - p
        tree, leaves = build_tree(ps, ones, resid, "sse", hp["max_depth"], hp["min_samples_leaf"],
                                  lambda: all_feats, root)
        for leaf, mask in leaves.items():
            hess = float(np.sum(p[mask] * (1 - p[mask])))
            step = hp["learning_rate"] * float(resid[mask].sum()) / max(hess, 1e-12)
            before = _leaf_loss(F[mask], y[mask])
            for _ in range(60):
                if _leaf_loss(F[mask] + step, y[mask]) <= before:
                    break
                step /= 2.0
            else:
                step = 0.0
            tree["value"][leaf] = step
            F[mask] += step
        trees.append(tree)
        train_loss.append(_leaf_loss(F, y) / n)
        if Xva is not None:
            Fva += tree_predict(tree, Xva)
            valid_loss.append(log_loss(sigmoid(Fva), yva))
    return {"base": base, "trees": trees}, {"train_loss": train_loss, "valid_loss": valid_loss}


def gbm_raw(params, X):
    F = np.full(len(X), float(params["base"]))
    for tree in params["trees"]:
        F += tree_predict(tree, X)
    return F


def proba_gbm(params, X):
    return sigmoid(gbm_raw(params, X))


# -- random forest ----------------------------------------------------------

def _n_split_features(max_features, d):
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if max_features == "all":
        return d
    return min(int(max_features), d)


def fit_drf(X, y, Xva, yva, hp, seed):
    """Bagged Gini trees with per-split feature sampling.

    Each tree owns a generator spawned from ``seed`` so results do not depend
    on build order. Bootstrap draws become integer row weights, which keeps the
    presorted column orders valid for every tree.
    """
    n, d = X.shape
    ps = _Presorted(X)
    k = _n_split_features(hp["max_features"], d)
    trees = []
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n)
    for child in np.random.SeedSequence(seed).spawn(hp["n_trees"]):
        rng = np.random.default_rng(child)
        if hp["bootstrap"]:
            w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)

        def pick():
            return np.sort(rng.choice(d, size=k, replace=False))

        tree, _ = build_tree(ps, w, y, "gini", hp["max_depth"], hp["min_samples_leaf"], pick, w > 0)
        trees.append(tree)
        oob = w == 0
        if oob.any():
            oob_sum[oob] += tree_predict(tree, X[oob])
            oob_cnt[oob] += 1
    seen = oob_cnt > 0
    oob_acc = None
    if seen.any():
        oob_pred = (oob_sum[seen] / oob_cnt[seen]) >= 0.5
        oob_acc = float(np.mean(oob_pred == (y[seen] > 0.5)))
    return {"trees": trees}, {"oob_accuracy": oob_acc}


def drf_tree_outputs(params, X) -> np.ndarray:
    """Per-tree positive-class fractions, shape (n_trees, n_rows)."""
    return np.stack([tree_predict(t, X) for t in params["trees"]])


def proba_drf(params, X):
    return drf_tree_outputs(params, X).mean(axis=0)
