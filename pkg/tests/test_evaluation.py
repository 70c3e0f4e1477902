import json
import math
import statistics
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memptec.errors import LengthMismatch
from memptec.evaluation import (
    ConfusionCounts,
    MetricSet,
    Report,
    aggregate,
    confusion,
    from_confusion,
    metrics,
    reports_to_csv,
    reports_to_json,
)

# 20 rows tallied by hand: 9 hits, 1 false alarm, 2 misses, 8 correct rejections
TRUTH_20 = [1] * 9 + [0] + [1, 1] + [0] * 8
PRED_20 = [1] * 9 + [1] + [0, 0] + [0] * 8


def test_confusion_small_cases():
    assert confusion([1, 0, 1], [1, 0, 1]) == ConfusionCounts(tp=2, fp=0, fn=0, tn=1)
    assert confusion([1, 1], [0, 0]).fp == 2


def test_confusion_hand_tallied_20():
    assert confusion(PRED_20, TRUTH_20) == ConfusionCounts(9, 1, 2, 8)


def test_confusion_length_mismatch():
    with pytest.raises(LengthMismatch):
        confusion([1, 0], [1])
    with pytest.raises(LengthMismatch):
        metrics([], [])


def test_metrics_match_fraction_arithmetic():
    proba = [0.9 if p else 0.1 for p in PRED_20]
    m = metrics(proba, TRUTH_20)
    precision = Fraction(9, 10)
    recall = Fraction(9, 11)
    f1 = 2 * precision * recall / (precision + recall)
    assert m.precision == pytest.approx(float(precision), abs=1e-12)
    assert m.recall == pytest.approx(float(recall), abs=1e-12)
    assert m.f1 == pytest.approx(float(f1), abs=1e-12)
    assert m.accuracy == pytest.approx(float(Fraction(17, 20)), abs=1e-12)
    assert (round(m.precision, 4), round(m.recall, 4), round(m.f1, 4), round(m.accuracy, 4)) == \
        (0.9, 0.8182, 0.8571, 0.85)
    assert (m.fp, m.fn) == (1, 2)


def test_exact_probabilities_are_perfect():
    m = metrics([1.0, 0.0, 1.0, 0.0], [1, 0, 1, 0])
    assert (m.mse, m.rmse, m.accuracy) == (0.0, 0.0, 1.0)


def test_half_probabilities():
    m = metrics([0.5] * 6, [1, 1, 1, 0, 0, 0])
    assert m.mse == 0.25
    assert m.rmse == 0.5


def test_zero_denominators_give_zero():
    m = metrics([0.1, 0.2], [0, 0])
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def _ms(acc):
    return MetricSet(acc, acc, acc, acc, 0.0, 0.0, 0, 0)


def test_aggregate_standard_error():
    accs = [0.9, 1.0, 0.8, 0.9, 0.9]
    agg = aggregate([_ms(a) for a in accs])
    assert agg["accuracy"]["mean"] == pytest.approx(0.9)
    oracle = statistics.stdev(accs) / math.sqrt(5)
    assert agg["accuracy"]["standard_error"] == pytest.approx(oracle, abs=1e-12)
    assert round(agg["accuracy"]["standard_error"], 4) == 0.0316


def test_aggregate_identical_runs():
    agg = aggregate([_ms(0.7)] * 4)
    assert agg["accuracy"]["standard_error"] == 0.0


def test_aggregate_single_run_warns():
    with pytest.warns(UserWarning):
        agg = aggregate([_ms(0.6)])
    assert agg["accuracy"] == {"mean": 0.6, "standard_error": 0.0}


def _brute(proba, truth, threshold):
    tp = fp = fn = tn = 0
    sq = 0.0
    for p, t in zip(proba, truth):
        label = 1 if p >= threshold else 0
        if label and t:
            tp += 1
        elif label:
            fp += 1
        elif t:
            fn += 1
        else:
            tn += 1
        sq += (p - t) ** 2
    return tp, fp, fn, tn, sq / len(truth)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60),
       st.floats(0.01, 0.99))
def test_metrics_agree_with_brute_force(rows, threshold):
    proba = [p for p, _ in rows]
    truth = [t for _, t in rows]
    m = metrics(proba, truth, threshold)
    tp, fp, fn, tn, mse = _brute(proba, truth, threshold)
    n = len(rows)
    assert (m.fp, m.fn) == (fp, fn)
    assert m.accuracy == pytest.approx((tp + tn) / n)
    assert m.precision == pytest.approx(tp / (tp + fp) if tp + fp else 0.0)
    assert m.recall == pytest.approx(tp / (tp + fn) if tp + fn else 0.0)
    assert m.mse == pytest.approx(mse, abs=1e-12)
    assert abs(m.rmse ** 2 - m.mse) <= 1e-12
    assert abs(m.accuracy + (m.fp + m.fn) / n - 1) <= 1e-12
    for v in (m.precision, m.recall, m.f1, m.accuracy, m.mse, m.rmse):
        assert 0 <= v <= 1


def test_from_confusion_f1_is_harmonic_mean():
    m = from_confusion(ConfusionCounts(3, 1, 3, 5), 0.1)
    assert m.f1 == pytest.approx(2 / (1 / 0.75 + 1 / 0.5))


def test_report_files():
    rep = Report("synthetic", "memptec", "glm", [_ms(0.9), _ms(1.0)], n_features=56)
    doc = json.loads(reports_to_json([rep], {"seed": 3}))
    assert doc["seed"] == 3
    assert doc["reports"][0]["n_features"] == 56
    assert doc["reports"][0]["mean_se"]["accuracy"]["mean"] == pytest.approx(0.95)
    lines = reports_to_csv([rep], ["seed=3"]).splitlines()
    assert lines[0] == "# seed=3"
    assert lines[1].startswith("dataset,feature_set,algorithm,n_features,fold,precision")
    assert [ln.split(",")[4] for ln in lines[2:]] == ["0", "1", "mean", "se"]
