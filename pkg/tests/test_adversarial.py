from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memptec.adversarial import (
    CURVE_COLUMNS,
    attack_information,
    attack_percentage,
    attack_topn,
    coalition_value,
    curves_to_csv,
    drift_interaction,
    drift_temporal,
    exact_shapley,
    manipulate_feature,
    n_for_fraction,
    rank_features,
    _rng,
)
from memptec.catalog import INTERACTION_FEATURES, catalog, default_grouping
from memptec.errors import EmptyPool, IncompleteGrouping, TooManyFeaturesForExact, UnknownFeature
from memptec.features import ccs
from memptec.models import TrainConfig, TrainedModel, train

from .conftest import toy_matrix


def _linear_model(fm, weights, bias):
    return TrainedModel("glm", {}, fm.catalog.fingerprint, fm.catalog.names,
                        {"weights": np.asarray(weights, dtype=float), "bias": float(bias)})


def _threshold_toy(n=120, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    X[:, 2] = rng.integers(0, 2, size=n)
    y = X[:, 2].astype(int)
    fm = toy_matrix(X, y)
    # predicts malicious exactly when the third feature is 1
    return fm, _linear_model(fm, [0.0, 0.0, 20.0], -10.0)


@pytest.fixture(scope="module")
def trained(small_matrix):
    return train(TrainConfig("glm", seed=0), small_matrix)


def _benign_guard(x):
    ben = x.labels == 0
    snapshot = x.X[ben].copy()
    seen = []

    def observe(step_id, matrix):
        assert np.array_equal(matrix.X[ben], snapshot), step_id
        assert np.array_equal(matrix.labels, x.labels)
        seen.append(step_id)
    return observe, seen


# -- ranking ----------------------------------------------------------------

@pytest.mark.parametrize("method", ["permutation", "exact_shapley"])
def test_constant_model_scores_zero_in_catalog_order(method):
    fm, _ = _threshold_toy()
    const = _linear_model(fm, [0.0, 0.0, 0.0], 3.0)
    r = rank_features(const, fm, method, seed=1, repeats=3)
    assert r.names == fm.catalog.names
    assert all(s == 0 for _, s in r.entries)


def _shapley_by_orderings(value, F):
    phi = np.zeros(F)
    orders = list(permutations(range(F)))
    for order in orders:
        members = ()
        for j in order:
            grown = tuple(sorted(members + (j,)))
            phi[j] += value(grown) - value(members)
            members = grown
    return phi / len(orders)


def test_exact_shapley_matches_brute_force_and_efficiency():
    fm, model = _threshold_toy()
    repeats = 4
    phi = exact_shapley(model, fm, seed=7, repeats=repeats)
    rng = _rng(7)
    perms = [[rng.permutation(len(fm)) for _ in range(3)] for _ in range(repeats)]
    full = float(np.mean((fm.X[:, 2] >= 0.5) == fm.labels))

    def value(S):
        return full if len(S) == 3 else coalition_value(model, fm, S, perms)

    oracle = _shapley_by_orderings(value, 3)
    for j, name in enumerate(fm.catalog.names):
        assert phi[name] == pytest.approx(oracle[j], abs=1e-12)
    assert phi[fm.catalog.names[0]] == 0 and phi[fm.catalog.names[1]] == 0
    total = sum(phi[n] for n in fm.catalog.names) + phi["__empty__"]
    assert total == pytest.approx(phi["__full__"], abs=1e-12)
    assert phi["__full__"] == full == 1.0


@pytest.mark.parametrize("method", ["permutation", "exact_shapley"])
def test_thresholded_feature_ranked_first(method):
    fm, model = _threshold_toy()
    r = rank_features(model, fm, method, seed=3)
    assert r.names[0] == fm.catalog.names[2]
    assert r.scores[r.names[0]] > max(r.scores[n] for n in r.names[1:])


def test_permutation_ranking_seeded(trained, small_matrix):
    a = rank_features(trained, small_matrix, seed=5, repeats=2)
    b = rank_features(trained, small_matrix, seed=5, repeats=2)
    assert a == b
    assert sorted(a.names) == sorted(small_matrix.catalog.names)
    scores = [s for _, s in a.entries]
    assert scores == sorted(scores, reverse=True)


def test_exact_shapley_feature_limit(small_matrix, trained):
    with pytest.raises(TooManyFeaturesForExact):
        rank_features(trained, small_matrix, "exact_shapley")


# -- manipulation -----------------------------------------------------------

def test_constant_pool_overwrites_malicious_rows():
    x = toy_matrix(np.arange(12.0).reshape(6, 2), [1, 0, 1, 0, 1, 0])
    pool = toy_matrix(np.column_stack([np.full(5, 7.0), np.arange(5.0)]), [0] * 5)
    out = manipulate_feature(x, x.catalog.names[0], pool, seed=1)
    assert out.X[x.labels == 1, 0].tolist() == [7.0, 7.0, 7.0]
    assert np.array_equal(out.X[x.labels == 0], x.X[x.labels == 0])
    assert np.array_equal(out.X[:, 1], x.X[:, 1])
    assert np.array_equal(x.X, np.arange(12.0).reshape(6, 2))


def test_no_malicious_rows_means_no_change():
    x = toy_matrix(np.arange(8.0).reshape(4, 2), [0, 0, 0, 0])
    out = manipulate_feature(x, x.catalog.names[1], x, seed=0)
    assert np.array_equal(out.X, x.X)


def test_manipulation_seeded_and_drawn_from_pool(small_matrix):
    name = "star"
    a = manipulate_feature(small_matrix, name, small_matrix, seed=4)
    b = manipulate_feature(small_matrix, name, small_matrix, seed=4)
    assert np.array_equal(a.X, b.X)
    benign_values = set(small_matrix.column(name)[small_matrix.labels == 0])
    assert set(a.column(name)[a.labels == 1]) <= benign_values


def test_manipulation_errors(small_matrix):
    with pytest.raises(UnknownFeature):
        manipulate_feature(small_matrix, "nope", small_matrix, seed=0)
    only_mal = small_matrix.take(np.flatnonzero(small_matrix.labels == 1))
    with pytest.raises(EmptyPool):
        manipulate_feature(small_matrix, "star", only_mal, seed=0)


# -- attack curves ----------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(1, 80), st.integers(1, 100))
def test_ceiling_rule(F, pct):
    k = n_for_fraction(pct / 100, F)
    # smallest k with k / F >= pct / 100, by exact integer arithmetic
    assert k == -(-pct * F // 100)


def test_half_of_four_features():
    fm = toy_matrix(np.random.default_rng(0).normal(size=(20, 4)), [1, 0] * 10)
    model = _linear_model(fm, [1.0, 0.0, 0.0, 0.0], 0.0)
    r = rank_features(model, fm, seed=0, repeats=2)
    curve = attack_percentage(model, fm, fm, r, [0.5], seed=0)
    assert len(curve.steps) == 2
    assert len(curve.steps[1].manipulated) == 2
    assert list(curve.steps[1].manipulated) == r.names[:2]


def test_percentage_curve_invariants(trained, small_matrix):
    r = rank_features(trained, small_matrix, seed=1, repeats=2)
    observer, seen = _benign_guard(small_matrix)
    fracs = [i / 10 for i in range(1, 11)]
    curve = attack_percentage(trained, small_matrix, small_matrix, r, fracs, seed=2, observer=observer)
    assert seen[0] == "baseline" and len(seen) == 11
    assert curve.steps[0].metrics == curve.baseline
    assert curve.steps[0].manipulated == ()
    for prev, cur in zip(curve.steps, curve.steps[1:]):
        assert set(prev.manipulated) <= set(cur.manipulated)
    assert list(curve.steps[-1].manipulated) == r.names
    assert [len(s.manipulated) for s in curve.steps[1:]] == [n_for_fraction(f, 56) for f in fracs]


def test_topn_full_equals_percentage_full(trained, small_matrix):
    r = rank_features(trained, small_matrix, seed=1, repeats=2)
    top = attack_topn(trained, small_matrix, small_matrix, r, n_max=56, seed=9)
    pct = attack_percentage(trained, small_matrix, small_matrix, r, [1.0], seed=9)
    assert top.final == pct.final
    assert len(top.steps) == 57


def test_topn_ten_steps_and_constant_model_flat(small_matrix):
    const = _linear_model(small_matrix, np.zeros(56), -2.0)
    r = rank_features(const, small_matrix, seed=0, repeats=1)
    observer, _ = _benign_guard(small_matrix)
    curve = attack_topn(const, small_matrix, small_matrix, r, n_max=10, seed=0, observer=observer)
    assert len(curve.steps) == 11
    assert all(s.metrics == curve.baseline for s in curve.steps)
    assert [len(s.manipulated) for s in curve.steps] == list(range(11))


def test_information_groups_move_together(trained, small_matrix):
    r = rank_features(trained, small_matrix, seed=1, repeats=2)
    grouping = default_grouping(catalog())
    observer, _ = _benign_guard(small_matrix)
    curve = attack_information(trained, small_matrix, small_matrix, grouping, r, seed=0, observer=observer)
    assert len(curve.steps) == 1 + len(grouping)
    for prev, cur in zip(curve.steps, curve.steps[1:]):
        added = set(cur.manipulated) - set(prev.manipulated)
        assert added == set(grouping[cur.step_id])
    sums = [sum(r.scores[n] for n in grouping[s.step_id]) for s in curve.steps[1:]]
    assert sums == sorted(sums, reverse=True)


def test_information_grouping_errors(trained, small_matrix):
    r = rank_features(trained, small_matrix, seed=1, repeats=1)
    grouping = default_grouping(catalog())
    grouping["authors"] = ["author_exist", "author_name"]
    with pytest.raises(IncompleteGrouping):
        attack_information(trained, small_matrix, small_matrix, grouping, r)
    single = {"everything": list(small_matrix.catalog.names)}
    curve = attack_information(trained, small_matrix, small_matrix, single, r)
    assert len(curve.steps) == 2


# -- drift ------------------------------------------------------------------

def test_temporal_drift(trained, small_matrix):
    observer, _ = _benign_guard(small_matrix)
    snapshots = {}

    def keep(step_id, matrix):
        observer(step_id, matrix)
        snapshots[step_id] = matrix.X.copy()

    curve = drift_temporal(trained, small_matrix, [0, 30, 90, 360], observer=keep)
    assert curve.steps[1].step_id == "d0"
    assert curve.steps[1].metrics == curve.baseline
    mal = small_matrix.labels == 1
    age = small_matrix.catalog.index("package_age")
    assert (snapshots["d30"][mal, age] == small_matrix.X[mal, age] + 30).all()
    assert (snapshots["d90"][mal, age] > snapshots["d30"][mal, age]).all()
    for role in ("author", "maintainer", "contributor", "publisher"):
        svc = small_matrix.X[mal, small_matrix.catalog.index(f"{role}_service_time")]
        cpn = small_matrix.X[mal, small_matrix.catalog.index(f"{role}_CPN")]
        got = snapshots["d360"][mal, small_matrix.catalog.index(f"{role}_CCS")]
        assert np.allclose(got, ccs(svc + 360, cpn))
    monotone = [i for i, f in enumerate(small_matrix.catalog) if f.monotonic]
    order = ["baseline", "d0", "d30", "d90", "d360"]
    for a, b in zip(order, order[1:]):
        assert (snapshots[b][:, monotone] >= snapshots[a][:, monotone] - 1e-9).all()


def test_interaction_drift(trained, small_matrix):
    observer, _ = _benign_guard(small_matrix)
    snapshots = {}

    def keep(step_id, matrix):
        observer(step_id, matrix)
        snapshots[step_id] = matrix.X.copy()

    curve = drift_interaction(trained, small_matrix, [0, 10, 50], observer=keep)
    assert curve.steps[1].metrics == curve.baseline
    mal = small_matrix.labels == 1
    for name in INTERACTION_FEATURES:
        j = small_matrix.catalog.index(name)
        assert (snapshots["c50"][mal, j] == small_matrix.X[mal, j] + 50).all()
    with pytest.raises(ValueError):
        drift_interaction(trained, small_matrix, [10, 5])


def test_curve_csv_columns(trained, small_matrix):
    curve = drift_interaction(trained, small_matrix, [0, 1])
    curve.feature_set = "memptec"
    lines = curves_to_csv([curve], ["seed=1"]).splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1].split(",") == list(CURVE_COLUMNS)
    assert len(lines) == 2 + 3
    assert lines[2].split(",")[:5] == ["glm", "memptec", "drift_interaction", "baseline", "0"]


def test_labels_used_are_original(small_matrix):
    # a model keyed on star: pushing malicious star counts up changes predictions,
    # and the score must still be against the original labels
    j = small_matrix.catalog.index("star")
    w = np.zeros(56)
    w[j] = -1.0
    model = _linear_model(small_matrix, w, 0.5)
    curve = drift_interaction(model, small_matrix, [0, 1000])
    n_mal = int(small_matrix.labels.sum())
    assert curve.final.fn == n_mal
