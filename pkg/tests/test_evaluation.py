import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stressdetect.data import NEUTRAL, STRESS
from stressdetect.errors import SchemaError
from stressdetect.evaluation import (ConfusionMatrix, EvaluationReport, ParticipantResult,
                                     aggregate_cohort, cohort_frequencies, confusion_percentages,
                                     evaluate, format_metric, mean_confusion_percentages,
                                     prediction_trace, rank_features, read_report, write_report)
from stressdetect.learning import DecisionStump, StumpBoostClassifier


def brute_force(pred, truth):
    tp = tn = fp = fn = 0
    for p, t in zip(pred, truth):
        if t == 1 and p == 1:
            tp += 1
        elif t == 1:
            fn += 1
        elif p == 1:
            fp += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def test_perfect_predictions():
    y = np.array([1, -1, 1, 1])
    _, m = evaluate(y, y)
    assert m == {"accuracy": 1.0, "precision": 1.0, "recall": 1.0}


def test_mirrored_counts():
    m = ConfusionMatrix(tp=96, tn=91, fp=9, fn=4).metrics()
    assert m["accuracy"] == pytest.approx(187 / 200, abs=1e-15)
    assert m["precision"] == pytest.approx(96 / 105, abs=1e-15)
    assert m["recall"] == pytest.approx(0.96, abs=1e-15)


def test_no_positive_predictions():
    cm, m = evaluate([-1, -1, -1], [1, -1, 1])
    assert m["precision"] is None and m["recall"] == 0.0
    assert format_metric(m["precision"]) == "undefined"


def test_length_mismatch_and_bad_labels():
    with pytest.raises(SchemaError):
        evaluate([1, -1], [1])
    with pytest.raises(SchemaError):
        evaluate([], [])
    with pytest.raises(SchemaError):
        evaluate([1, 0], [1, -1])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 300))
def test_metrics_match_counting(seed, n):
    rng = np.random.default_rng(seed)
    truth = rng.choice([STRESS, NEUTRAL], n)
    pred = rng.choice([STRESS, NEUTRAL], n)
    cm, m = evaluate(pred, truth)
    tp, tn, fp, fn = brute_force(pred, truth)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (tp, tn, fp, fn)
    assert m["accuracy"] == pytest.approx((tp + tn) / n, abs=1e-12)
    assert m["precision"] == (None if tp + fp == 0 else pytest.approx(tp / (tp + fp), abs=1e-12))
    assert m["recall"] == (None if tp + fn == 0 else pytest.approx(tp / (tp + fn), abs=1e-12))
    # accuracy = (recall P + specificity N) / (P + N)
    P, N = tp + fn, tn + fp
    rec = cm.recall or 0.0
    spec = cm.specificity or 0.0
    assert m["accuracy"] == pytest.approx((rec * P + spec * N) / (P + N), abs=1e-12)


def test_aggregate_examples():
    assert aggregate_cohort([{"accuracy": 0.9}])["accuracy"].format() == "0.90±0.00"
    agg = aggregate_cohort([{"accuracy": 0.8}, {"accuracy": 1.0}])["accuracy"]
    assert agg.mean == pytest.approx(0.9) and agg.std == pytest.approx(0.1)
    assert agg.format() == "0.90±0.10"
    with pytest.raises(SchemaError):
        aggregate_cohort([])


def test_aggregate_resummation():
    rng = np.random.default_rng(8)
    accs = rng.uniform(0.6, 1.0, 18).tolist()
    agg = aggregate_cohort([{"accuracy": a, "precision": None} for a in accs])
    mean = 0.0
    for a in accs:
        mean += a
    mean /= len(accs)
    var = 0.0
    for a in accs:
        var += (a - mean) ** 2
    assert agg["accuracy"].mean == pytest.approx(mean, abs=1e-12)
    assert agg["accuracy"].std == pytest.approx((var / len(accs)) ** 0.5, abs=1e-12)
    assert agg["precision"].mean is None and agg["precision"].format() == "undefined"


def test_confusion_percentages_examples():
    rows = confusion_percentages(ConfusionMatrix(tp=9605, tn=9100, fp=900, fn=395))
    assert [f"{v:.2f}" for v in rows[0]] == ["96.05", "3.95"]
    assert [f"{v:.2f}" for v in rows[1]] == ["9.00", "91.00"]
    assert confusion_percentages(ConfusionMatrix(5, 5, 0, 0)) == ((100.0, 0.0), (0.0, 100.0))
    assert confusion_percentages(ConfusionMatrix(1, 0, 0, 1)) == ((50.0, 50.0), None)


def test_mean_percentages_skip_undefined_rows():
    rows = mean_confusion_percentages([ConfusionMatrix(1, 0, 0, 1), ConfusionMatrix(1, 1, 1, 0)])
    assert rows == ((75.0, 25.0), (50.0, 50.0))


def test_ranking_is_selection_order_with_repeats():
    model = StumpBoostClassifier(3, ["eda", "sdnn", "volc_b"])
    model.stumps_ = [DecisionStump(0, 0.0, 1, 1.0), DecisionStump(2, 0.0, 1, 0.5),
                     DecisionStump(2, 1.0, -1, 0.4)]
    assert rank_features(model) == ["eda", "volc_b", "volc_b"]
    assert rank_features(model, 1) == ["eda"]
    model.stumps_ = []
    with pytest.raises(SchemaError):
        rank_features(model)


def test_cohort_frequency_arithmetic():
    rankings = [["eda", "a", "b", "c", "d"]] * 14 + [["a", "b", "c", "d", "e"]] * 4
    freq = dict(cohort_frequencies(rankings))
    assert freq["eda"] == pytest.approx(100 * 14 / 90)
    assert f"{freq['eda']:.0f}" == "16"
    assert sum(freq.values()) == pytest.approx(100.0)


def test_dominant_feature_frequency():
    rankings = [["f0", "x", "y", "z", "w"] for _ in range(18)]
    assert cohort_frequencies(rankings)[0] == ("f0", 20.0)


def test_trace_run_of_ten_ticks():
    n = 300
    t = np.arange(n) / 10.0
    truth = np.where(t < 12, NEUTRAL, STRESS)
    pred = truth.copy()
    pred[100:110] = -pred[100:110]
    trace = prediction_trace(pred, truth, t)
    runs = trace.runs()
    assert len(runs) == 1 and runs[0].n_ticks == 10
    assert runs[0].duration == pytest.approx(1.0)
    assert trace.false_alarm_time == pytest.approx(1.0)
    perfect = prediction_trace(truth, truth, t)
    assert perfect.runs() == [] and np.array_equal(perfect.predicted, perfect.truth)


def test_constant_stress_model_false_alarm_time():
    t = np.arange(6000) / 10.0
    truth = np.where((t < 120) | (t >= 480), NEUTRAL, STRESS)
    trace = prediction_trace(np.full(6000, STRESS), truth, t)
    assert trace.false_alarm_time == pytest.approx(240.0)


def test_trace_csv(tmp_path):
    t = np.arange(3) / 10.0
    trace = prediction_trace([1, -1, 1], [1, 1, 1], t, ["PS", "PS", "CG"])
    trace.write_csv(tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "t_s,truth,predicted,task" and lines[2] == "0.1,1,-1,PS"
    with pytest.raises(SchemaError):
        prediction_trace([1, 1], [1, 1], [0.0, 0.0])


def test_report_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    parts = []
    for k in range(4):
        truth = rng.choice([1, -1], 50)
        pred = np.where(rng.random(50) < 0.8, truth, -truth)
        cm, _ = evaluate(pred, truth)
        parts.append(ParticipantResult(f"P{k + 1}", cm, ["eda", "pos_act", "eda"], 150, 50, 0.6,
                                       {"C": 2.0}))
    report = EvaluationReport(parts, {"modality": "combined"}, top_k=3)
    write_report(tmp_path / "report.json", report)
    again = read_report(tmp_path / "report.json")
    assert again.to_json() == report.to_json()
    doc = json.loads(report.to_json())
    assert set(doc) >= {"participants", "cohort", "confusion", "ranking"}
    assert doc["ranking"][0] == {"feature": "eda", "percent": pytest.approx(100 * 8 / 12)}
