"""Classification metrics, cohort aggregates, feature rankings and prediction traces."""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import NEUTRAL, STRESS
from .errors import SchemaError

UNDEFINED = "undefined"
METRICS = ("accuracy", "precision", "recall")


def _labels(values, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise SchemaError(f"{name} must be one-dimensional")
    if arr.dtype.kind in "US":
        arr = np.where(arr == "stress", STRESS, np.where(arr == "neutral", NEUTRAL, 0))
    arr = arr.astype(int)
    if not np.all((arr == STRESS) | (arr == NEUTRAL)):
        raise SchemaError(f"{name} must contain only +1 (stress) and -1 (neutral)")
    return arr


def _ratio(num, den):
    return num / den if den else None


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with stress as the positive class."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise SchemaError("confusion counts must be non-negative")

    @classmethod
    def from_labels(cls, truth, predicted) -> "ConfusionMatrix":
        truth = _labels(truth, "truth")
        predicted = _labels(predicted, "predictions")
        if len(truth) != len(predicted):
            raise SchemaError(f"{len(predicted)} predictions for {len(truth)} labels")
        if len(truth) == 0:
            raise SchemaError("cannot evaluate an empty prediction set")
        pos, hit = truth == STRESS, truth == predicted
        return cls(int(np.sum(pos & hit)), int(np.sum(~pos & hit)),
                   int(np.sum(~pos & ~hit)), int(np.sum(pos & ~hit)))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def precision(self):
        """None when nothing was predicted as stress."""
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self):
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self):
        return _ratio(self.tn, self.tn + self.fp)

    def percentages(self):
        """Row-normalised percentages: ((TP, FN), (FP, TN)); a row without samples is None."""
        stress = self.tp + self.fn
        neutral = self.fp + self.tn
        return (
            (100.0 * self.tp / stress, 100.0 * self.fn / stress) if stress else None,
            (100.0 * self.fp / neutral, 100.0 * self.tn / neutral) if neutral else None,
        )

    def metrics(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall}

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(predicted, truth) -> tuple:
    """ConfusionMatrix and its accuracy/precision/recall."""
    cm = ConfusionMatrix.from_labels(truth, predicted)
    return cm, cm.metrics()


def confusion_percentages(cm: ConfusionMatrix):
    return cm.percentages()


def mean_confusion_percentages(matrices) -> tuple:
    """Average of per-participant row percentages, skipping undefined rows."""
    rows = [m.percentages() for m in matrices]
    out = []
    for r in range(2):
        defined = [row[r] for row in rows if row[r] is not None]
        out.append(tuple(np.mean(defined, axis=0).tolist()) if defined else None)
    return tuple(out)


@dataclass(frozen=True)
class Aggregate:
    mean: float | None
    std: float | None
    n: int

    def format(self, digits: int = 2) -> str:
        if self.mean is None:
            return UNDEFINED
        return f"{self.mean:.{digits}f}±{self.std:.{digits}f}"


def aggregate_cohort(per_participant) -> dict:
    """Mean and population std of every metric over participants.

    ``per_participant`` is a sequence of metric dicts; undefined values are
    left out of that metric's aggregate.
    """
    rows = list(per_participant)
    if not rows:
        raise SchemaError("aggregate needs at least one participant")
    out = {}
    for name in rows[0]:
        vals = np.array([r[name] for r in rows if r.get(name) is not None], dtype=float)
        if len(vals):
            out[name] = Aggregate(float(vals.mean()), float(vals.std()), len(vals))
        else:
            out[name] = Aggregate(None, None, 0)
    return out


def rank_features(model, top_k: int | None = 5) -> list:
    """Feature names in stump selection order; repeats are kept."""
    names = model.ranked_features()
    if not names:
        raise SchemaError("cannot rank an empty ensemble")
    return names if top_k is None else names[:top_k]


def cohort_frequencies(rankings, top_k: int = 5) -> list:
    """(feature, percent) sorted by appearance share over participants x top_k slots.

    Ties are listed in order of first appearance.
    """
    rankings = [list(r)[:top_k] for r in rankings]
    if not rankings:
        return []
    counts = Counter()
    first_seen = {}
    for r in rankings:
        for pos, name in enumerate(r):
            counts[name] += 1
            first_seen.setdefault(name, (len(first_seen), pos))
    denom = len(rankings) * top_k
    order = sorted(counts, key=lambda f: (-counts[f], first_seen[f]))
    return [(f, 100.0 * counts[f] / denom) for f in order]


@dataclass(frozen=True)
class FalseAlarmRun:
    start: float
    end: float
    n_ticks: int
    truth: int

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class PredictionTrace:
    timestamps: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray
    tasks: np.ndarray
    tick: float

    def runs(self) -> list:
        """Maximal runs of consecutive wrong predictions."""
        wrong = self.truth != self.predicted
        edges = np.diff(np.r_[0, wrong.astype(int), 0])
        starts = np.flatnonzero(edges == 1)
        stops = np.flatnonzero(edges == -1)
        return [FalseAlarmRun(float(self.timestamps[a]), float(self.timestamps[a]) + (b - a) * self.tick,
                              int(b - a), int(self.truth[a]))
                for a, b in zip(starts, stops)]

    @property
    def false_alarm_time(self) -> float:
        return float(sum(r.duration for r in self.runs()))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "truth", "predicted", "task"])
            for t, a, b, task in zip(self.timestamps, self.truth, self.predicted, self.tasks):
                w.writerow([repr(float(t)), int(a), int(b), task])


def prediction_trace(predicted, truth, timestamps, tasks=None, rate: float = 10.0) -> PredictionTrace:
    truth = _labels(truth, "truth")
    predicted = _labels(predicted, "predictions")
    timestamps = np.asarray(timestamps, dtype=float)
    if not len(truth) == len(predicted) == len(timestamps):
        raise SchemaError("trace columns differ in length")
    if np.any(np.diff(timestamps) <= 0):
        raise SchemaError("trace timestamps must be increasing")
    tasks = np.asarray(tasks if tasks is not None else [""] * len(truth), dtype=object)
    return PredictionTrace(timestamps, truth, predicted, tasks, 1.0 / rate)


# --- reports ---------------------------------------------------------------

@dataclass
class ParticipantResult:
    participant_id: str
    confusion: ConfusionMatrix
    ranking: list = field(default_factory=list)
    n_train: int = 0
    n_test: int = 0
    majority_rate: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def metrics(self) -> dict:
        return self.confusion.metrics()

    def to_dict(self) -> dict:
        out = {"participant_id": self.participant_id, "confusion": self.confusion.to_dict(),
               "n_train": self.n_train, "n_test": self.n_test,
               "majority_rate": self.majority_rate, "ranking": list(self.ranking)}
        out.update(self.metrics)
        if self.extras:
            out["extras"] = self.extras
        return out

    @classmethod
    def from_dict(cls, d) -> "ParticipantResult":
        return cls(d["participant_id"], ConfusionMatrix(**d["confusion"]), list(d.get("ranking", [])),
                   d.get("n_train", 0), d.get("n_test", 0), d.get("majority_rate", 0.0),
                   dict(d.get("extras", {})))


@dataclass
class EvaluationReport:
    participants: list
    config: dict = field(default_factory=dict)
    top_k: int = 5

    @property
    def cohort(self) -> dict:
        return aggregate_cohort([p.metrics for p in self.participants])

    @property
    def confusion(self):
        return mean_confusion_percentages([p.confusion for p in self.participants])

    @property
    def ranking(self) -> list:
        lists = [p.ranking for p in self.participants if p.ranking]
        return cohort_frequencies(lists, self.top_k) if lists else []

    @property
    def majority_rate(self) -> float:
        return float(np.mean([p.majority_rate for p in self.participants]))

    def to_dict(self) -> dict:
        stress_row, neutral_row = self.confusion
        return {
            "format": 1,
            "config": self.config,
            "participants": [p.to_dict() for p in self.participants],
            "cohort": {k: {"mean": a.mean, "std": a.std, "n": a.n} for k, a in self.cohort.items()},
            "majority_rate": self.majority_rate,
            "confusion": {"stress": list(stress_row) if stress_row else None,
                          "neutral": list(neutral_row) if neutral_row else None},
            "top_k": self.top_k,
            "ranking": [{"feature": f, "percent": p} for f, p in self.ranking],
        }

    @classmethod
    def from_dict(cls, d) -> "EvaluationReport":
        return cls([ParticipantResult.from_dict(p) for p in d["participants"]],
                   dict(d.get("config", {})), int(d.get("top_k", 5)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))


def write_report(path, report: EvaluationReport):
    atomic_write_text(path, report.to_json())


def read_report(path) -> EvaluationReport:
    return EvaluationReport.from_json(Path(path).read_text(encoding="utf-8"))


def atomic_write_text(path, text: str):
    """Write through a ``.partial`` sibling so readers never see half a file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    tmp.replace(path)


def format_metric(value, digits: int = 2) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return UNDEFINED
    return f"{value:.{digits}f}"
