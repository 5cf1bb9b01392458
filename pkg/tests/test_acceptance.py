"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Criteria 9 to 11 generate full 18-participant cohorts and are marked slow.
"""
import json
import math
import time

import numpy as np
import pytest

from stressdetect import cli
from stressdetect.data import NEUTRAL, STRESS, TimeSeries
from stressdetect.evaluation import ConfusionMatrix, confusion_percentages, evaluate
from stressdetect.learning import (KernelSpec, SMOClassifier, StumpBoostClassifier,
                                   stratified_split_indices, train_stump)
from stressdetect.physio import (EDA_FILTER, PPG_FILTER, BeatSequence, band_pass_ppg, compute_hrv,
                                 low_pass_eda)
from stressdetect.pipeline import (ExperimentConfig, cohort_sessions, generate_cohort_dir, load_dataset,
                                   run_experiment, run_participant)
from stressdetect.synth import RANKING_EFFECTS, GeneratorConfig

from test_boosting import exhaustive_stump
from test_physio import butter_bandpass_gain, butter_lowpass_gain, sine, steady_amplitude
from test_svm import qp_dual, xor

# criterion number -> summary line, printed again at the end of the session
RESULTS = {}


def record(number, ok, detail, seconds=None):
    timing = f" [{seconds:.1f} s]" if seconds is not None else ""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}{timing}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def adaboost_bound_holds(model, X, y):
    staged = model.staged_training_error(X, y)
    eps = model.epsilons_
    bounds = np.cumprod(2 * np.sqrt(eps * (1 - eps)))
    return bool(np.all(staged <= bounds + 1e-12))


# --- 1 to 8: fast oracles --------------------------------------------------

def test_criterion_01_metric_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        truth = rng.choice([STRESS, NEUTRAL], n)
        pred = rng.choice([STRESS, NEUTRAL], n)
        _, m = evaluate(pred, truth)
        tp = sum(1 for p, t in zip(pred, truth) if p == 1 and t == 1)
        fp = sum(1 for p, t in zip(pred, truth) if p == 1 and t == -1)
        fn = sum(1 for p, t in zip(pred, truth) if p == -1 and t == 1)
        hits = sum(1 for p, t in zip(pred, truth) if p == t)
        want = {"accuracy": hits / n,
                "precision": tp / (tp + fp) if tp + fp else None,
                "recall": tp / (tp + fn) if tp + fn else None}
        for key, value in want.items():
            if (value is None) != (m[key] is None):
                worst = math.inf
            elif value is not None:
                worst = max(worst, abs(value - m[key]))
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-12 and elapsed < 1.0,
           f"1000 random prediction sets, max metric deviation {worst:.1e}", elapsed)


def test_criterion_02_confusion_percentages():
    (tp, fn), (fp, tn) = confusion_percentages(ConfusionMatrix(tp=9605, tn=9100, fp=900, fn=395))
    shown = [f"{v:.2f}" for v in (tp, fn, fp, tn)]
    ok = shown == ["96.05", "3.95", "9.00", "91.00"] and np.allclose(
        [tp, fn, fp, tn], [96.05, 3.95, 9.00, 91.00], rtol=0, atol=1e-12)
    record(2, ok, f"rows ({shown[0]}, {shown[1]}) / ({shown[2]}, {shown[3]})")


def test_criterion_03_stump_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, same_rule = 0.0, True
    for _ in range(50):
        x = rng.integers(0, 8, size=20) + rng.choice([0.0, 0.25], size=20)
        y = rng.choice([STRESS, NEUTRAL], size=20)
        w = rng.random(20)
        w /= w.sum()
        stump, err = train_stump(x[:, None], y, w, 0)
        want_err, want_thr, want_pol = exhaustive_stump(x, y, w)
        worst = max(worst, abs(err - want_err))
        same_rule &= (stump.threshold, stump.polarity) == (want_thr, want_pol)
    elapsed = time.perf_counter() - t0
    record(3, worst <= 1e-12 and same_rule and elapsed < 5.0,
           f"50 weighted 20-row instances, max error deviation {worst:.1e}", elapsed)


def test_criterion_04_adaboost_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    runs = violations = 0
    for k in range(20):
        X = rng.normal(size=(200, 6))
        y = np.where(X[:, k % 6] + X[:, (k + 1) % 6] ** 2 + rng.normal(size=200) > 0.5, STRESS, NEUTRAL)
        model = StumpBoostClassifier(int(rng.integers(1, 60))).fit(X, y)
        runs += 1
        violations += not adaboost_bound_holds(model, X, y)
    X = rng.normal(size=(200, 36))
    y = np.where(X[:, 7] > 0.1, STRESS, NEUTRAL)
    sep = StumpBoostClassifier(300).fit(X, y)
    runs += 1
    violations += not adaboost_bound_holds(sep, X, y)
    single = len(sep.stumps_) == 1 and sep.stumps_[0].feature_index == 7 and np.all(sep.predict(X) == y)
    elapsed = time.perf_counter() - t0
    record(4, violations == 0 and single and elapsed < 10.0,
           f"bound held on {runs - violations}/{runs} runs; separable data gave "
           f"{len(sep.stumps_)} stump(s), training accuracy {np.mean(sep.predict(X) == y):.2f}", elapsed)


def test_criterion_05_svm():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    gap, kkt = 0.0, 0.0
    for C, gamma in ((0.5, 0.5), (1.0, 2.0), (10.0, 0.2), (100.0, 1.0), (1.0, 0.05)):
        X = rng.normal(size=(20, 3))
        y = np.where(X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=20) > 0, STRESS, NEUTRAL)
        y[:2] = [STRESS, NEUTRAL]
        model = SMOClassifier("rbf", C, gamma).fit(X, y)
        _, want = qp_dual(KernelSpec("rbf", C, gamma)(X, X), y.astype(float), C)
        gap = max(gap, abs(model.dual_objective() - want))
        kkt = max(kkt, float(np.max(model.kkt_residuals(X, y))))
    X, y = xor()
    acc = float(np.mean(SMOClassifier("rbf", 10.0, 1.0).fit(X, y).predict(X) == y))
    elapsed = time.perf_counter() - t0
    record(5, gap <= 1e-3 and kkt <= 1e-3 and acc == 1.0 and elapsed < 30.0,
           f"dual gap {gap:.1e}, max KKT residual {kkt:.1e}, XOR accuracy {acc:.2f}", elapsed)


def test_criterion_06_filters():
    t0 = time.perf_counter()
    rate = 1000.0
    analytic = {
        "eda 0.05 Hz": (EDA_FILTER.magnitude(np.array([0.05]), rate)[0],
                        butter_lowpass_gain(0.05, 0.5, 2, rate) ** 2),
        "eda 5 Hz": (EDA_FILTER.magnitude(np.array([5.0]), rate)[0],
                     butter_lowpass_gain(5.0, 0.5, 2, rate) ** 2),
        "ppg DC": (PPG_FILTER.magnitude(np.array([1e-9]), rate)[0],
                   butter_bandpass_gain(1e-9, 0.5, 35.0, 2, rate) ** 2),
    }
    declared_ok = all(abs(a - b) <= 1e-6 for a, b in analytic.values())
    slow = steady_amplitude(low_pass_eda(TimeSeries("eda", 0.0, rate, sine(0.05, 200))).values, trim_s=40)
    fast = steady_amplitude(low_pass_eda(TimeSeries("eda", 0.0, rate, sine(5.0, 30))).values, trim_s=5)
    dc = np.max(np.abs(band_pass_ppg(TimeSeries("ppg", 0.0, rate, np.ones(30000))).values[10000:-10000]))
    ok = declared_ok and 0.95 <= slow <= 1.05 and fast <= 0.05 and dc <= 0.01
    elapsed = time.perf_counter() - t0
    record(6, ok and elapsed < 5.0,
           f"0.05 Hz gain {slow:.4f} (analytic {analytic['eda 0.05 Hz'][1]:.4f}), 5 Hz gain {fast:.5f} "
           f"(analytic {analytic['eda 5 Hz'][1]:.5f}), PPG DC gain {dc:.1e}", elapsed)


def test_criterion_07_hrv():
    times = np.concatenate([[0.0], np.cumsum(np.tile([0.9, 1.1], 60))])
    hrv = compute_hrv(BeatSequence(times, 1000.0), window=30.0, out_rate=10.0)
    # an even number of alternating intervals holds equally many of each
    balanced = []
    for t, v in zip(hrv.timestamps, hrv.values):
        inside = (times[1:] > t - 30.0) & (times[1:] <= t)
        if t >= 30.0 and inside.sum() % 2 == 0:
            balanced.append(v)
    err = float(np.max(np.abs(np.array(balanced) - 0.1)))
    regular = compute_hrv(BeatSequence(np.arange(0.0, 120.0, 1.0), 1000.0)).values
    record(7, err <= 1e-6 and np.all(regular == 0.0),
           f"alternating SDNN deviation {err:.1e} over {len(balanced)} ticks, regular max {regular.max():.1e}")


def test_criterion_08_split():
    t0 = time.perf_counter()
    y = np.r_[np.full(8200, STRESS), np.full(4600, NEUTRAL)]
    bad = []
    for seed in range(100):
        train, test = stratified_split_indices(y, 0.75, seed)
        counts = (np.sum(y[train] == STRESS), np.sum(y[train] == NEUTRAL),
                  np.sum(y[test] == STRESS), np.sum(y[test] == NEUTRAL))
        if counts != (6150, 3450, 2050, 1150):
            bad.append((seed, counts))
    elapsed = time.perf_counter() - t0
    record(8, not bad and elapsed < 5.0,
           f"100 seeds, {100 - len(bad)} gave 6150/3450 train and 2050/1150 test", elapsed)


# --- 9 to 11: planted cohorts -----------------------------------------------

RBF_C_GRID = (2.0 ** -1, 2.0 ** 3, 2.0 ** 7)
RBF_GAMMA_GRID = (2.0 ** -3, 2.0 ** -1, 2.0 ** 1)


@pytest.fixture(scope="module")
def cohorts(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    t0 = time.perf_counter()
    out = {
        "sep07": generate_cohort_dir(GeneratorConfig(separability=0.7), root / "sep07"),
        "sep00": generate_cohort_dir(GeneratorConfig(separability=0.0), root / "sep00"),
    }
    out["seconds"] = time.perf_counter() - t0
    return out


def cohort_accuracy(config, cohort):
    report = run_experiment(config, cohort)
    return report.cohort["accuracy"].mean, report.majority_rate, report


@pytest.mark.slow
def test_criterion_09_planted_cohort_ordering(cohorts):
    t0 = time.perf_counter()
    acc = {m: cohort_accuracy(ExperimentConfig(modality=m), cohorts["sep07"])[0]
           for m in ("phys", "badge", "combined")}
    ordering = acc["combined"] >= acc["badge"] >= acc["phys"] - 0.02
    strong = acc["combined"] >= 0.90
    # at separability 0 every classifier should sit at the majority-class rate
    gaps = {}
    for clf in ("adaboost", "svm_linear"):
        for m in ("phys", "badge", "combined"):
            a, majority, _ = cohort_accuracy(ExperimentConfig(modality=m, classifier=clf), cohorts["sep00"])
            gaps[f"{clf}/{m}"] = a - majority
    # the RBF grid search costs about a minute per participant, so it runs on two
    # participants with a 3x3 grid spanning the default ranges
    rbf = ExperimentConfig(modality="combined", classifier="svm_rbf", C_grid=RBF_C_GRID,
                           gamma_grid=RBF_GAMMA_GRID)
    runs = [run_participant(load_dataset(d), rbf)[0] for d in cohort_sessions(cohorts["sep00"])[:2]]
    gaps["svm_rbf/combined (2 participants)"] = float(
        np.mean([r.metrics["accuracy"] - r.majority_rate for r in runs]))
    chance = all(abs(g) <= 0.05 for g in gaps.values())
    elapsed = time.perf_counter() - t0 + cohorts["seconds"]
    worst = max(gaps, key=lambda k: abs(gaps[k]))
    record(9, ordering and strong and chance and elapsed < 600.0,
           f"sep 0.7 AdaBoost combined {acc['combined']:.3f} / badge {acc['badge']:.3f} / "
           f"phys {acc['phys']:.3f}; sep 0 largest gap to majority {gaps[worst]:+.3f} ({worst}), "
           f"RBF {gaps['svm_rbf/combined (2 participants)']:+.3f}", elapsed)


@pytest.mark.slow
def test_criterion_10_ranking_recovery(tmp_path):
    t0 = time.perf_counter()
    cohort = generate_cohort_dir(GeneratorConfig(effects=RANKING_EFFECTS, eda_contact_noise=0.0),
                                 tmp_path / "ranking")
    report = run_experiment(ExperimentConfig(), cohort)
    ranking = report.ranking
    top3 = [f for f, _ in ranking[:3]]
    share = sum(p for f, p in ranking if f in ("eda", "pos_act"))
    ok = {"eda", "pos_act"} <= set(top3) and share >= 30.0
    elapsed = time.perf_counter() - t0
    record(10, ok, "top 3: " + ", ".join(f"{f} {p:.1f}%" for f, p in ranking[:3])
           + f"; eda + pos_act {share:.1f}%", elapsed)


@pytest.mark.slow
def test_criterion_11_end_to_end_determinism(tmp_path):
    t0 = time.perf_counter()
    codes = [cli.main(["all", "--out", str(tmp_path / name), "--seed", "0"]) for name in ("a", "b")]
    first = (tmp_path / "a" / "report.json").read_bytes()
    second = (tmp_path / "b" / "report.json").read_bytes()
    summary_same = (tmp_path / "a" / "summary.md").read_bytes() == (tmp_path / "b" / "summary.md").read_bytes()
    n = len(json.loads(first)["participants"])
    elapsed = time.perf_counter() - t0
    record(11, codes == [0, 0] and first == second and summary_same and n == 18,
           f"two 'all' runs, exit codes {codes}, report.json identical: {first == second} "
           f"({len(first)} bytes, {n} participants)", elapsed)
