import numpy as np
import pytest

from surprisal.analysis import (
    anomaly_scores,
    auc_score,
    break_even_threshold,
    evaluate,
    threshold_sensitivity,
)
from surprisal.analysis.scoring import cutoff_curve
from surprisal.core import timeline_from_rows
from surprisal.errors import SurprisalError, UndefinedAUCError
from surprisal.transform import transform_timeline

from oracles import brute_auc, brute_break_even


# --- anomaly scores --------------------------------------------------------

def test_identical_bins_score_zero():
    t = timeline_from_rows("ab", [{"a": 0.5, "b": 0.5}] * 5)
    series = anomaly_scores(transform_timeline(t).divergences)
    assert series.scores.tolist() == [0.0] * 5


def test_unique_dominant_feature_scores_highest():
    base = {"a": 0.5, "b": 0.3, "c": 0.2}
    rows = [base] * 5
    rows[3] = {"a": 0.1, "b": 0.1, "c": 0.1, "z": 0.7}
    t = timeline_from_rows("abcz", rows)
    series = anomaly_scores(transform_timeline(t).divergences, [0, 0, 0, 1, 0])
    others = np.delete(series.scores, 3)
    assert series.scores[3] > others.max()
    assert list(series)[3] == (3, series.scores[3], 1)


def test_two_bin_scores_equal(two_bin):
    s = anomaly_scores(transform_timeline(two_bin).divergences).scores
    assert s[0] == pytest.approx(s[1], abs=1e-15)


def test_scores_length_mismatch():
    with pytest.raises(SurprisalError):
        anomaly_scores([0.1, 0.2], [1])


# --- break-even ------------------------------------------------------------

def test_break_even_simple():
    c = break_even_threshold([1, 2, 3, 4], [0, 0, 1, 1])
    assert c == 3
    r = evaluate([1, 2, 3, 4], [0, 0, 1, 1], c)
    assert r.precision == r.recall == 1.0


def test_break_even_interleaved_matches_enumeration():
    scores = [1, 2, 3, 4, 5, 6, 7, 8]
    labels = [0, 1, 0, 1, 0, 1, 0, 1]
    assert break_even_threshold(scores, labels) == brute_break_even(scores, labels)[0]


def test_break_even_separable():
    scores = [0.1, 0.2, 0.3, 0.8, 0.9]
    labels = [0, 0, 0, 1, 1]
    c = break_even_threshold(scores, labels)
    r = evaluate(scores, labels, c)
    assert c == 0.8 and r.precision == r.recall == r.f1 == 1.0


def test_break_even_needs_both_classes():
    with pytest.raises(SurprisalError):
        break_even_threshold([1, 2], [1, 1])


def test_break_even_matches_brute_force_on_random_instances(rng):
    for _ in range(500):
        n = int(rng.integers(2, 13))
        scores = rng.integers(0, 6, size=n).astype(float)  # plenty of ties
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            continue
        c = break_even_threshold(scores, labels)
        want_c, want_gap, _ = brute_break_even(scores, labels)
        assert c == want_c
        curve = cutoff_curve(scores, labels)
        gaps = np.abs(curve.precision - curve.recall)
        r = evaluate(scores, labels, c)
        assert abs(r.precision - r.recall) <= gaps.min() + 1e-12
        assert abs(r.precision - r.recall) == pytest.approx(want_gap, abs=1e-12)


# --- evaluate --------------------------------------------------------------

def test_evaluate_perfect():
    r = evaluate([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0], 0.5)
    assert tuple(r.confusion) == (2, 0, 2, 0)
    assert r.auc == r.precision == r.recall == r.f1 == r.accuracy == 1.0


def test_evaluate_inverted_predictions_accuracy_zero():
    r = evaluate([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1], 0.5)
    assert r.accuracy == 0.0 and r.auc == 0.0


def test_auc_all_scores_equal_is_half():
    assert auc_score([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_single_class_raises_but_keeps_metrics():
    with pytest.raises(UndefinedAUCError) as info:
        evaluate([0.1, 0.9], [1, 1], 0.5)
    rep = info.value.report
    assert rep.auc is None and rep.recall == 0.5
    assert evaluate([0.1, 0.9], [1, 1], 0.5, strict=False).auc is None


def test_auc_matches_pair_enumeration(rng):
    for _ in range(200):
        n = int(rng.integers(2, 25))
        s = rng.integers(0, 8, size=n).astype(float)
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        assert auc_score(s, y) == pytest.approx(brute_auc(s, y), abs=1e-12)


def test_auc_invariant_under_monotone_transform(rng):
    for _ in range(50):
        s = rng.random(40)
        y = rng.integers(0, 2, size=40)
        if y.min() == y.max():
            continue
        a = auc_score(s, y)
        assert auc_score(np.exp(3 * s) - 7, y) == a
        assert auc_score(s ** 3, y) == a


def test_report_invariants(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        s = rng.random(n)
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        r = evaluate(s, y, float(rng.random()))
        assert sum(r.confusion) == n
        for v in (r.precision, r.recall, r.f1, r.accuracy, r.auc):
            assert 0 <= v <= 1
        p, q = r.precision, r.recall
        assert r.f1 == (2 * p * q / (p + q) if p + q else 0.0)


def test_report_dict_fields():
    d = evaluate([0.9, 0.1], [1, 0], 0.5).to_dict()
    assert set(d) == {"confusion", "precision", "recall", "f1", "accuracy", "auc", "threshold"}
    assert d["confusion"] == {"tp": 1, "fp": 0, "tn": 1, "fn": 0}


def test_labels_must_be_binary():
    with pytest.raises(SurprisalError):
        evaluate([0.1, 0.2], [0, 2], 0.1)


# --- sensitivity -----------------------------------------------------------

def test_sensitivity_zero_offset_equals_evaluate():
    s, y = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
    rows = threshold_sensitivity(s, y, 0.35, [0.0])
    assert len(rows) == 1 and rows[0].report == evaluate(s, y, 0.35)


def test_sensitivity_rows_follow_offsets(rng):
    s = rng.random(200)
    y = (s + 0.3 * rng.random(200) > 0.8).astype(int)
    base = break_even_threshold(s, y)
    offsets = [-0.1, -0.05, 0.0, 0.05, 0.1]
    rows = threshold_sensitivity(s, y, base, offsets)
    assert [r.offset for r in rows] == offsets
    for r in rows:
        want = evaluate(s, y, base * (1 + r.offset))
        assert r.report == want
    # raising the cutoff never predicts more positives
    predicted = [r.report.confusion.tp + r.report.confusion.fp for r in rows]
    assert predicted == sorted(predicted, reverse=True)


def test_sensitivity_beyond_max_score():
    rows = threshold_sensitivity([0.1, 0.2, 0.3], [0, 1, 1], 0.5, [0.05, 0.1])
    assert all(r.report.recall == 0 for r in rows)
