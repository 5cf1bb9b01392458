"""Markdown summary placing synthetic-cohort results next to published reference values.

The reference values come from a private participant cohort; they are shown
for orientation only and are never acceptance targets.
"""
from __future__ import annotations

from .evaluation import UNDEFINED, EvaluationReport

# published cohort results (mean±std over 18 participants)
REFERENCE_CLASSIFIERS = {
    "adaboost": ("AdaBoost (T=300)", "0.94±0.03", "0.94±0.03", "0.96±0.02"),
    "svm_rbf": ("RBF kernel SVM", "0.93±0.03", "0.93±0.03", "0.96±0.01"),
    "svm_linear": ("Linear kernel SVM", "0.85±0.04", "0.84±0.04", "0.94±0.02"),
}
REFERENCE_MODALITIES = {
    "phys": ("Physiological", "0.79±0.08", "0.79±0.09", "0.86±0.06"),
    "badge": ("Sociometric", "0.89±0.03", "0.90±0.03", "0.92±0.03"),
    "combined": ("Physiological + Sociometric", "0.94±0.03", "0.94±0.03", "0.96±0.02"),
}
REFERENCE_T5 = ("AdaBoost (T=5)", "0.83±0.04", "0.84±0.07", "0.88±0.04")
REFERENCE_CONFUSION = ((96.05, 3.95), (9.00, 91.00))
REFERENCE_PER_PARTICIPANT = {
    "P1": (0.95, 0.95, 0.97), "P2": (0.91, 0.92, 0.96), "P3": (0.87, 0.89, 0.92),
    "P4": (0.96, 0.96, 0.98), "P5": (0.99, 0.99, 0.99), "P6": (0.89, 0.90, 0.93),
    "P7": (0.966, 0.97, 0.966), "P8": (0.93, 0.94, 0.94), "P9": (0.93, 0.94, 0.95),
    "P10": (0.92, 0.92, 0.95), "P11": (0.95, 0.95, 0.96), "P12": (0.96, 0.96, 0.97),
    "P13": (0.91, 0.92, 0.94), "P14": (0.97, 0.96, 0.98), "P15": (0.91, 0.90, 0.95),
    "P16": (0.95, 0.96, 0.96), "P17": (0.98, 0.98, 0.99), "P18": (0.96, 0.96, 0.97),
}
REFERENCE_FREQUENCIES = (("eda", 16), ("pos_act", 15), ("hz3_f", 14), ("bm_act", 13), ("amp3_f", 13))

NOTE = ("Reference values were measured on a private participant cohort and cannot be "
        "reproduced here; they are shown for orientation only, not as targets.")


def _fmt(value, digits=2):
    return UNDEFINED if value is None else f"{value:.{digits}f}"


def _cohort_cells(report: EvaluationReport):
    agg = report.cohort
    return [agg[m].format() for m in ("accuracy", "precision", "recall")]


def _table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def render_summary(reports: dict) -> str:
    """``reports`` maps run names to reports; ``main`` is the primary run.

    Companion runs named after a modality (``phys``, ``badge``, ``combined``)
    or ``T5`` fill the modality and reduced-ensemble tables.
    """
    main = reports["main"]
    cfg = main.config
    classifier = cfg.get("classifier", "adaboost")
    modality = cfg.get("modality", "combined")
    out = ["# Stress detection summary", "", NOTE, "",
           f"Main run: classifier `{classifier}`, modality `{modality}`, "
           f"{len(main.participants)} participants, split seed {cfg.get('seed')}.", ""]

    out += ["## Cohort results", ""]
    ref = REFERENCE_CLASSIFIERS.get(classifier)
    rows = [["this run"] + _cohort_cells(main)]
    if ref:
        rows.append([f"{ref[0]} (published reference)"] + list(ref[1:]))
    out += _table(["run", "accuracy", "precision", "recall"], rows)
    out += ["", f"Majority-class rate on the test splits: {main.majority_rate:.2f}.", ""]

    out += ["## Per-participant results", ""]
    rows = []
    for p in main.participants:
        m = p.metrics
        ref_row = REFERENCE_PER_PARTICIPANT.get(p.participant_id)
        ref_cell = " / ".join(f"{v:g}" for v in ref_row) if ref_row else "-"
        rows.append([p.participant_id, _fmt(m["accuracy"]), _fmt(m["precision"]), _fmt(m["recall"]),
                     ref_cell])
    out += _table(["participant", "accuracy", "precision", "recall",
                   "published reference (acc / prec / rec)"], rows)
    out.append("")

    out += ["## Average confusion matrix (row %)", ""]
    stress_row, neutral_row = main.confusion
    rows = []
    for name, row, ref_row in (("stress", stress_row, REFERENCE_CONFUSION[0]),
                               ("neutral", neutral_row, REFERENCE_CONFUSION[1])):
        cells = [_fmt(v) for v in row] if row else [UNDEFINED, UNDEFINED]
        rows.append([name] + cells + [f"{ref_row[0]:.2f} / {ref_row[1]:.2f}"])
    out += _table(["truth", "predicted stress", "predicted neutral",
                   "published reference"], rows)
    out.append("")

    modal = {m: reports[m] for m in ("phys", "badge", "combined") if m in reports}
    modal.setdefault(modality, main)
    if len(modal) > 1:
        out += ["## Modalities", ""]
        rows = []
        for m in ("phys", "badge", "combined"):
            if m in modal:
                ref_m = REFERENCE_MODALITIES[m]
                rows.append([ref_m[0]] + _cohort_cells(modal[m]) + [ref_m[1]])
        out += _table(["modality", "accuracy", "precision", "recall",
                       "published reference accuracy"], rows)
        out.append("")

    if "T5" in reports:
        out += ["## Five-stump ensembles", ""]
        rows = [["AdaBoost (T=5), this run"] + _cohort_cells(reports["T5"]),
                [f"{REFERENCE_T5[0]} (published reference)"] + list(REFERENCE_T5[1:])]
        out += _table(["run", "accuracy", "precision", "recall"], rows)
        out.append("")

    if main.ranking:
        out += ["## Feature ranking", "",
                f"Share of the top-{main.top_k} slots over all participants.", ""]
        ref = dict(REFERENCE_FREQUENCIES)
        rows = [[f, f"{pct:.1f}%", f"{ref[f]}%" if f in ref else "-"] for f, pct in main.ranking[:10]]
        out += _table(["feature", "this run", "published reference"], rows)
        out.append("")
    return "\n".join(out) + "\n"
