"""Data model, closest-timestamp fusion and the session file format."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import AlignmentError, LabelingError, SchemaError

PHYS_FEATURES = ("eda", "eda_f", "ppg", "ppg_t", "hrv")
BADGE_FEATURES = (
    "bm", "bm_act", "bm_r", "pos_act", "pos_r", "pos_lr", "pos_fb",
    "voiced", "unvoiced", "vol_f", "vol_b", "volc_f", "volc_b",
    "hz0_f", "amp0_f", "hz1_f", "amp1_f", "hz2_f", "amp2_f", "hz3_f", "amp3_f",
    "hz0_b", "amp0_b", "hz1_b", "amp1_b", "hz2_b", "amp2_b", "hz3_b", "amp3_b",
    "pitch_f", "pitch_b",
)
FEATURE_NAMES = PHYS_FEATURES + BADGE_FEATURES
N_FEATURES = len(FEATURE_NAMES)

STRESS = 1
NEUTRAL = -1
LABEL_NAMES = {STRESS: "stress", NEUTRAL: "neutral"}
LABEL_VALUES = {v: k for k, v in LABEL_NAMES.items()}

TASKS = ("NT1", "PP", "PS", "CG", "PAD", "NT2")

MODALITIES = {
    "phys": PHYS_FEATURES,
    "badge": BADGE_FEATURES,
    "combined": FEATURE_NAMES,
}

# slack for comparing float timestamps built from different grids
_TIME_EPS = 1e-9


def label_value(label) -> int:
    """Map ``"stress"``/``"neutral"`` (or +1/-1) to the +1/-1 encoding."""
    if isinstance(label, str):
        try:
            return LABEL_VALUES[label]
        except KeyError:
            raise SchemaError(f"unknown label {label!r}") from None
    value = int(label)
    if value not in LABEL_NAMES:
        raise SchemaError(f"unknown label {label!r}")
    return value


def feature_indices(modality: str) -> np.ndarray:
    try:
        names = MODALITIES[modality]
    except KeyError:
        raise SchemaError(f"unknown modality {modality!r}") from None
    return np.array([FEATURE_NAMES.index(n) for n in names])


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled channel; sample ``i`` sits at ``start_time + i / rate``."""

    channel_name: str
    start_time: float
    rate: float
    values: np.ndarray

    def __post_init__(self):
        if not self.rate > 0:
            raise SchemaError(f"{self.channel_name}: rate must be positive, got {self.rate}")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise SchemaError(f"{self.channel_name}: values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise SchemaError(f"{self.channel_name}: non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.values)) / self.rate

    @property
    def end_time(self) -> float:
        """Timestamp of the last sample."""
        return self.start_time + (len(self.values) - 1) / self.rate

    def with_values(self, values, channel_name=None, rate=None) -> "TimeSeries":
        return TimeSeries(channel_name or self.channel_name, self.start_time,
                          rate or self.rate, values)


@dataclass(frozen=True)
class FeatureVector:
    timestamp: float
    phys: tuple
    badge: tuple

    def __post_init__(self):
        if len(self.phys) != len(PHYS_FEATURES) or len(self.badge) != len(BADGE_FEATURES):
            raise SchemaError("feature vector must hold 5 physiological and 31 badge features")

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.phys, self.badge]).astype(float)

    @classmethod
    def from_array(cls, timestamp, x) -> "FeatureVector":
        x = np.asarray(x, dtype=float)
        if x.shape != (N_FEATURES,):
            raise SchemaError(f"expected {N_FEATURES} features, got shape {x.shape}")
        return cls(float(timestamp), tuple(x[:5].tolist()), tuple(x[5:].tolist()))


@dataclass(frozen=True)
class TaskSegment:
    task: str
    start: float
    end: float
    label: int

    def __post_init__(self):
        if not self.end > self.start:
            raise SchemaError(f"segment {self.task}: end must exceed start")
        object.__setattr__(self, "label", label_value(self.label))

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class FusedSamples:
    """Output of :func:`synchronize`: a tick grid and one 36-wide row per tick."""

    timestamps: np.ndarray
    X: np.ndarray

    def __len__(self):
        return len(self.timestamps)

    def __iter__(self) -> Iterator[FeatureVector]:
        for t, row in zip(self.timestamps, self.X):
            yield FeatureVector.from_array(t, row)


@dataclass(eq=False)
class LabeledDataset:
    participant_id: str
    timestamps: np.ndarray
    X: np.ndarray
    y: np.ndarray
    tasks: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[1] != N_FEATURES:
            raise SchemaError(f"dataset rows must have {N_FEATURES} features")
        if not (len(self.timestamps) == len(self.X) == len(self.y)):
            raise SchemaError("timestamps, rows and labels differ in length")
        if not np.all(np.isin(self.y, (STRESS, NEUTRAL))):
            raise SchemaError("labels must be +1 (stress) or -1 (neutral)")

    def __len__(self):
        return len(self.y)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.participant_id == other.participant_id
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y))

    @property
    def n_stress(self) -> int:
        return int(np.sum(self.y == STRESS))

    @property
    def n_neutral(self) -> int:
        return int(np.sum(self.y == NEUTRAL))

    def subset(self, index) -> "LabeledDataset":
        tasks = None if self.tasks is None else self.tasks[index]
        return LabeledDataset(self.participant_id, self.timestamps[index], self.X[index],
                              self.y[index], tasks)

    def rows(self) -> Iterator[tuple]:
        for t, x, label in zip(self.timestamps, self.X, self.y):
            yield FeatureVector.from_array(t, x), int(label)


def _as_channel_map(channels) -> dict:
    if isinstance(channels, Mapping):
        return dict(channels)
    return {ts.channel_name: ts for ts in channels}


def nearest_indices(series: TimeSeries, ticks: np.ndarray) -> np.ndarray:
    """Index of the sample closest in time to each tick; the earlier sample wins ties."""
    n = len(series)
    base = np.floor((ticks - series.start_time) * series.rate).astype(np.int64)
    # floor may be off by one through rounding, so look one sample either side
    cand = np.stack([base - 1, base, base + 1, base + 2])
    cand = np.clip(cand, 0, n - 1)
    dist = np.abs(series.start_time + cand / series.rate - ticks)
    return cand[np.argmin(dist, axis=0), np.arange(len(ticks))]


def synchronize(phys_channels, badge_channels, target_rate: float = 10.0) -> FusedSamples:
    """Fuse both sensor streams on a common grid by closest timestamp.

    The grid starts at the latest channel start and stops at the earliest
    channel end.
    """
    if not target_rate > 0:
        raise AlignmentError("target rate must be positive")
    channels = _as_channel_map(phys_channels)
    channels.update(_as_channel_map(badge_channels))
    missing = [name for name in FEATURE_NAMES if name not in channels]
    if missing:
        raise SchemaError(f"missing channels: {', '.join(missing)}")
    used = [channels[name] for name in FEATURE_NAMES]
    for ts in used:
        if len(ts) == 0:
            raise SchemaError(f"channel {ts.channel_name} is empty")

    start = max(ts.start_time for ts in used)
    end = min(ts.end_time for ts in used)
    if end < start - _TIME_EPS:
        raise AlignmentError(f"channels do not overlap (latest start {start}, earliest end {end})")
    n_ticks = math.floor(max(end - start, 0.0) * target_rate + 1e-6) + 1
    ticks = start + np.arange(n_ticks) / target_rate

    X = np.empty((n_ticks, N_FEATURES))
    for j, ts in enumerate(used):
        X[:, j] = ts.values[nearest_indices(ts, ticks)]
    return FusedSamples(ticks, X)


def label_by_segments(samples, segments: Sequence[TaskSegment], participant_id: str = "") -> LabeledDataset:
    """Attach the label of the enclosing task segment to every fused sample.

    Segments are half-open ``[start, end)``; the final segment also owns its end point.
    """
    if isinstance(samples, FusedSamples):
        timestamps, X = samples.timestamps, samples.X
    else:
        vectors = list(samples)
        timestamps = np.array([v.timestamp for v in vectors], dtype=float)
        X = np.array([v.values for v in vectors], dtype=float).reshape(len(vectors), N_FEATURES)

    segments = sorted(segments, key=lambda s: s.start)
    for a, b in zip(segments, segments[1:]):
        if b.start < a.end - _TIME_EPS:
            raise SchemaError(f"segments {a.task} and {b.task} overlap")

    y = np.zeros(len(timestamps), dtype=int)
    tasks = np.empty(len(timestamps), dtype=object)
    for k, seg in enumerate(segments):
        inside = (timestamps >= seg.start - _TIME_EPS) & (timestamps < seg.end - _TIME_EPS)
        if k == len(segments) - 1:
            inside |= np.abs(timestamps - seg.end) <= _TIME_EPS
        y[inside] = seg.label
        tasks[inside] = seg.task
    orphans = timestamps[y == 0]
    if len(orphans):
        raise LabelingError(orphans)
    return LabeledDataset(participant_id, timestamps, X, y, tasks)


# ---------------------------------------------------------------- file format

def _fmt(value: float) -> str:
    return repr(float(value))


def write_channels_csv(path, timestamps, columns: Mapping[str, np.ndarray], precise: bool = True):
    """Write ``timestamp_s,<channel>,...`` with LF endings."""
    path = Path(path)
    names = list(columns)
    data = np.column_stack([np.asarray(timestamps, dtype=float)] +
                           [np.asarray(columns[n], dtype=float) for n in names])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["timestamp_s"] + names) + "\n")
        if precise:
            fh.writelines(",".join(map(repr, row)) + "\n" for row in data.tolist())
        else:
            np.savetxt(fh, data, fmt="%.6g", delimiter=",")


def _read_header(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header or header[0] != "timestamp_s":
        raise SchemaError(f"{path}: header must start with 'timestamp_s'")
    return header


def read_channels_csv(path) -> dict:
    """Read a channel table written by :func:`write_channels_csv` into TimeSeries."""
    path = Path(path)
    header = _read_header(path)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    if data.shape[0] == 0:
        raise SchemaError(f"{path}: no samples")
    if data.shape[1] != len(header):
        raise SchemaError(f"{path}: {data.shape[1]} columns but header lists {len(header)}")
    t = data[:, 0]
    if len(t) > 1:
        steps = np.diff(t)
        rate = (len(t) - 1) / (t[-1] - t[0])
        if np.any(steps <= 0) or np.max(np.abs(steps - 1.0 / rate)) > 1e-6 * max(1.0, 1.0 / rate):
            raise SchemaError(f"{path}: timestamps are not uniformly spaced")
        # undo the rounding the timestamp column picked up (999.9999999999999 -> 1000)
        snapped = round(rate, 6)
        if abs(snapped - rate) <= 1e-9 * rate:
            rate = snapped
    else:
        rate = 1.0
    return {name: TimeSeries(name, float(t[0]), float(rate), data[:, j + 1])
            for j, name in enumerate(header[1:])}


def write_segments_csv(path, segments: Iterable[TaskSegment]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("task,start_s,end_s,label\n")
        for seg in segments:
            fh.write(f"{seg.task},{_fmt(seg.start)},{_fmt(seg.end)},{LABEL_NAMES[seg.label]}\n")


def read_segments_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["task", "start_s", "end_s", "label"]:
            raise SchemaError(f"{path}: header must be task,start_s,end_s,label")
        try:
            return [TaskSegment(r["task"], float(r["start_s"]), float(r["end_s"]), r["label"])
                    for r in reader]
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: {exc}") from None


def write_dataset_csv(path, data: LabeledDataset):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(("timestamp_s",) + FEATURE_NAMES + ("label",)) + "\n")
        for t, row, label in zip(data.timestamps.tolist(), data.X.tolist(), data.y.tolist()):
            fh.write(",".join([repr(t)] + [repr(v) for v in row] + [LABEL_NAMES[label]]) + "\n")


def read_dataset_csv(path, participant_id: str = "") -> LabeledDataset:
    path = Path(path)
    expected = ["timestamp_s", *FEATURE_NAMES, "label"]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != expected:
            raise SchemaError(f"{path}: unexpected dataset header")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: empty dataset")
    try:
        numeric = np.array([[float(v) for v in r[:-1]] for r in rows])
        y = np.array([label_value(r[-1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: {exc}") from None
    return LabeledDataset(participant_id or path.parent.name, numeric[:, 0], numeric[:, 1:], y)


@dataclass
class Session:
    """One participant directory: fused-ready channels plus ground-truth segments."""

    participant_id: str
    phys: dict
    badge: dict
    segments: list

    def fuse(self, target_rate: float = 10.0) -> LabeledDataset:
        return label_by_segments(synchronize(self.phys, self.badge, target_rate),
                                 self.segments, self.participant_id)


def read_session(directory) -> Session:
    directory = Path(directory)
    for name in ("phys.csv", "badge.csv", "segments.csv"):
        if not (directory / name).is_file():
            raise SchemaError(f"{directory}: missing {name}")
    return Session(directory.name,
                   read_channels_csv(directory / "phys.csv"),
                   read_channels_csv(directory / "badge.csv"),
                   read_segments_csv(directory / "segments.csv"))


def write_session(directory, participant_id, phys: Mapping[str, TimeSeries],
                  badge: Mapping[str, TimeSeries], segments):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for fname, channels in (("phys.csv", phys), ("badge.csv", badge)):
        first = next(iter(channels.values()))
        write_channels_csv(directory / fname, first.timestamps,
                           {name: ts.values for name, ts in channels.items()})
    write_segments_csv(directory / "segments.csv", segments)
