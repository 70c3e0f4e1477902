import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memptec.catalog import catalog, subset
from memptec.dataset import SplitSpec, split
from memptec.errors import BadHyperparam, CatalogMismatch, NonFiniteFeature, SingleClassTraining
from memptec.features import FeatureMatrix
from memptec.models import ALGORITHMS, TrainConfig, TrainedModel, predict_label, predict_proba, train
from memptec.models.mlp import init_params, loss_and_grad
from memptec.models.trees import build_tree, _Presorted

from .conftest import toy_matrix

FAST = {
    "glm": {},
    "svm": {"epochs": 10},
    "gbm": {"n_trees": 10},
    "drf": {"n_trees": 10},
    "mlp": {"epochs": 20, "hidden": [8]},
}


def _separable():
    rng = np.random.default_rng(0)
    pos = rng.uniform(1.0, 3.0, size=(10, 2))
    neg = rng.uniform(-3.0, -1.0, size=(10, 2))
    return toy_matrix(np.vstack([pos, neg]), [1] * 10 + [0] * 10)


def test_glm_separable_training_accuracy():
    fm = _separable()
    m = train(TrainConfig("glm"), fm)
    assert np.array_equal(predict_label(m, fm), fm.labels)


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_every_algorithm_fits_separable_toy(alg):
    fm = _separable()
    # 20 rows is a single mini-batch per epoch, so the network needs more steps here
    hp = {"epochs": 300, "hidden": [8], "learning_rate": 0.01} if alg == "mlp" else FAST[alg]
    m = train(TrainConfig(alg, hp, seed=1), fm, fm)
    assert (predict_label(m, fm) == fm.labels).mean() >= 0.9


def test_single_class_rejected():
    with pytest.raises(SingleClassTraining):
        train(TrainConfig("glm"), toy_matrix(np.ones((5, 2)), [1] * 5))


def _walk(tree, x):
    node = 0
    while tree["feature"][node] >= 0:
        f = tree["feature"][node]
        node = tree["left"][node] if x[f] <= tree["threshold"][node] else tree["right"][node]
    return tree["value"][node]


def test_drf_oob_accuracy_on_synthetic_corpus(small_matrix):
    m = train(TrainConfig("drf", {"n_trees": 100}, seed=4), small_matrix)
    reported = m.info["oob_accuracy"]
    assert reported > 0.8
    # replay: bootstrap counts from each tree's own generator, OOB votes by hand
    X, y = small_matrix.X, small_matrix.labels
    n = len(y)
    votes, counts = np.zeros(n), np.zeros(n)
    for child, tree in zip(np.random.SeedSequence(4).spawn(100), m.parameters["trees"]):
        rng = np.random.default_rng(child)
        w = np.bincount(rng.integers(0, n, size=n), minlength=n)
        for i in np.flatnonzero(w == 0):
            votes[i] += _walk(tree, X[i])
            counts[i] += 1
    seen = counts > 0
    oracle = np.mean(((votes[seen] / counts[seen]) >= 0.5) == (y[seen] == 1))
    assert reported == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_proba_in_unit_interval_and_deterministic(alg, small_matrix):
    s = split(small_matrix, SplitSpec(seed=2))
    cfg = TrainConfig(alg, FAST[alg], seed=5)
    m1, m2 = train(cfg, s.train, s.valid), train(cfg, s.train, s.valid)
    p1, p2 = predict_proba(m1, s.test), predict_proba(m2, s.test)
    assert ((p1 >= 0) & (p1 <= 1)).all()
    assert np.array_equal(p1, p2)


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_model_json_round_trip(alg, small_matrix):
    s = split(small_matrix, SplitSpec(seed=3))
    m = train(TrainConfig(alg, FAST[alg], seed=6), s.train, s.valid)
    back = TrainedModel.from_json(m.to_json())
    assert np.array_equal(predict_proba(back, s.test), predict_proba(m, s.test))


def test_zero_weight_glm_gives_half():
    fm = toy_matrix(np.random.default_rng(1).normal(size=(7, 3)), [0, 1, 0, 1, 0, 1, 0])
    m = TrainedModel("glm", {}, fm.catalog.fingerprint, fm.catalog.names,
                     {"weights": np.zeros(3), "bias": 0.0})
    assert np.array_equal(predict_proba(m, fm), np.full(7, 0.5))
    # inclusive tie rule
    assert predict_label(m, fm).tolist() == [1] * 7


def _bias_only(fm, bias):
    return TrainedModel("glm", {}, fm.catalog.fingerprint, fm.catalog.names,
                        {"weights": np.zeros(fm.X.shape[1]), "bias": bias})


def test_threshold_rules():
    fm = toy_matrix(np.zeros((3, 2)), [0, 1, 0])
    below = _bias_only(fm, float(np.log(0.49 / 0.51)))
    assert predict_label(below, fm).tolist() == [0, 0, 0]
    high = _bias_only(fm, float(np.log(0.8 / 0.2)))
    assert predict_label(high, fm, threshold=0.9).tolist() == [0, 0, 0]
    assert predict_label(high, fm, threshold=0.5).tolist() == [1, 1, 1]
    with pytest.raises(ValueError):
        predict_label(high, fm, threshold=1.0)


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_duplicate_rows_identical_probability(alg, small_matrix):
    if alg == "svm":
        with pytest.warns(UserWarning, match="training scores"):
            m = train(TrainConfig(alg, FAST[alg], seed=2), small_matrix)
    else:
        m = train(TrainConfig(alg, FAST[alg], seed=2), small_matrix)
    dup = FeatureMatrix(np.vstack([small_matrix.X[:1]] * 4), np.zeros(4, dtype=np.int64), small_matrix.catalog)
    p = predict_proba(m, dup)
    assert (p == p[0]).all()


def test_catalog_mismatch(small_matrix):
    m = train(TrainConfig("glm", seed=0), small_matrix)
    other = small_matrix.select(subset(catalog(), "memptec_e"))
    with pytest.raises(CatalogMismatch):
        predict_proba(m, other)


@pytest.mark.parametrize("alg,hp", [("glm", {"l2": -1}), ("svm", {"C": 0}), ("gbm", {"max_depth": 0}),
                                    ("drf", {"max_features": "half"}), ("mlp", {"hidden": []}),
                                    ("gbm", {"nope": 1}), ("xgb", {})])
def test_bad_hyperparams(alg, hp, small_matrix):
    with pytest.raises(BadHyperparam):
        train(TrainConfig(alg, hp), small_matrix)


def test_non_finite_feature():
    X = np.array([[0.0, 1.0], [np.nan, 0.0], [1.0, 1.0], [2.0, 0.0]])
    with pytest.raises(NonFiniteFeature):
        train(TrainConfig("glm"), toy_matrix(X, [0, 1, 0, 1]))


def test_standardization_uses_training_rows_only():
    rng = np.random.default_rng(3)
    Xtr = rng.normal(0.0, 1.0, size=(60, 3))
    Xva = rng.normal(50.0, 5.0, size=(20, 3))
    ytr = np.arange(60) % 2
    m = train(TrainConfig("glm", seed=0), toy_matrix(Xtr, ytr), toy_matrix(Xva, np.arange(20) % 2))
    assert np.allclose(m.standardization["mean"], Xtr.mean(axis=0))
    assert np.allclose(m.standardization["std"], Xtr.std(axis=0))
    trees = train(TrainConfig("gbm", {"n_trees": 2}), toy_matrix(Xtr, ytr))
    assert trees.standardization is None


def test_gbm_training_loss_non_increasing(small_matrix):
    m = train(TrainConfig("gbm", {"n_trees": 40, "learning_rate": 0.5}, seed=0), small_matrix)
    losses = np.array(m.info["train_loss"])
    assert len(losses) == 41
    assert (np.diff(losses) <= 1e-12).all()


def _flat(params):
    return [a for W, b in params for a in (W, b)]


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 4))
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    params = init_params([4, 6, 3, 1], rng)
    _, grads = loss_and_grad(params, X, y, l2=0.01)
    h = 1e-6
    for arr, g in zip(_flat(params), _flat(grads)):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_and_grad(params, X, y, 0.01)[0]
            arr[idx] = old - h
            down = loss_and_grad(params, X, y, 0.01)[0]
            arr[idx] = old
            num[idx] = (up - down) / (2 * h)
        rel = np.linalg.norm(num - g) / max(np.linalg.norm(num) + np.linalg.norm(g), 1e-12)
        assert rel <= 1e-4


@pytest.mark.parametrize("alg", ["drf", "gbm"])
def test_ensemble_output_recomputed_by_hand(alg, small_matrix):
    m = train(TrainConfig(alg, {"n_trees": 5}, seed=9), small_matrix)
    X = small_matrix.X[:25]
    per_tree = np.array([[_walk(t, x) for x in X] for t in m.parameters["trees"]])
    if alg == "drf":
        expected = per_tree.mean(axis=0)
    else:
        expected = 1.0 / (1.0 + np.exp(-(m.parameters["base"] + per_tree.sum(axis=0))))
    got = predict_proba(m, FeatureMatrix(X, small_matrix.labels[:25], small_matrix.catalog))
    assert np.allclose(got, expected, atol=1e-12)


def test_tree_split_tie_goes_to_lowest_feature():
    col = np.array([0.0, 1.0, 2.0, 3.0])
    X = np.column_stack([col, col, col])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    w = np.ones(4)
    tree, _ = build_tree(_Presorted(X), w, y, "gini", 1, 1, lambda: np.array([2, 1, 0]), np.ones(4, bool))
    assert tree["feature"][0] == 0
    assert tree["threshold"][0] == 1.5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_drf_depends_only_on_seed(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 4))
    y = (X[:, 0] + 0.3 * rng.normal(size=30) > 0).astype(int)
    if len(set(y)) < 2:
        y[0] = 1 - y[0]
    fm = toy_matrix(X, y)
    cfg = TrainConfig("drf", {"n_trees": 4}, seed=seed)
    assert np.array_equal(predict_proba(train(cfg, fm), fm), predict_proba(train(cfg, fm), fm))
