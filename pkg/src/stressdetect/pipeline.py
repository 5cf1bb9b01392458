"""Per-participant experiment runner and cohort file handling."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .badge import AccelStream, BadgeConfig, extract_badge_features
from .data import (FEATURE_NAMES, MODALITIES, STRESS, LabeledDataset, TimeSeries, feature_indices,
                   read_channels_csv, read_segments_csv, read_session, write_channels_csv,
                   write_session)
from .errors import ConfigurationError, SchemaError
from .evaluation import (EvaluationReport, ParticipantResult, atomic_write_text, evaluate,
                         prediction_trace)
from .learning import (DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, LinearSVMClassifier, RangeScaler,
                       SMOClassifier, StumpBoostClassifier, grid_search_cv, stratified_split_indices)
from .learning.persistence import ModelBundle, save_model
from .physio import extract_physio_features
from .synth import GeneratorConfig, RawSession, generate_session, manifest, participant_ids, \
    participant_timeline, write_manifest

CLASSIFIERS = ("adaboost", "svm_linear", "svm_rbf")
RAW_FILES = ("physio_raw.csv", "accel.csv", "audio_front.csv", "audio_back.csv")


@dataclass(frozen=True)
class ExperimentConfig:
    modality: str = "combined"
    classifier: str = "adaboost"
    T: int = 300
    C: float = 10.0
    C_grid: tuple = DEFAULT_C_GRID
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    folds: int = 5
    # rows used by the RBF grid search; the final model sees the whole training split
    cv_max_rows: int | None = 1000
    train_fraction: float = 0.75
    seed: int = 0
    top_k: int = 5
    jobs: int = 1

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ConfigurationError(f"modality must be one of {sorted(MODALITIES)}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigurationError(f"classifier must be one of {list(CLASSIFIERS)}")
        if self.T < 1:
            raise ConfigurationError("T must be at least 1")
        if not self.C > 0:
            raise ConfigurationError("C must be positive")
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError("train fraction must lie strictly between 0 and 1")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["C_grid"] = list(self.C_grid)
        d["gamma_grid"] = list(self.gamma_grid)
        # worker count never changes results
        d.pop("jobs")
        return d

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]


# --- feature extraction ----------------------------------------------------

def extract_features(eda: TimeSeries, ppg: TimeSeries, accel: AccelStream, front: TimeSeries,
                     back: TimeSeries, out_rate: float = 10.0, badge_config: BadgeConfig = BadgeConfig()):
    """Physiological and badge channel dicts at ``out_rate``."""
    phys = extract_physio_features(eda, ppg, out_rate)
    badge = extract_badge_features(accel, front, back, out_rate, badge_config)
    return phys, badge


def crop_to_segments(channels: dict, segments, rate: float = 10.0) -> dict:
    """Keep the ticks of the labelled span ``[first start, last end)``."""
    start, end = segments[0].start, segments[-1].end
    n_keep = int(round((end - start) * rate))
    out = {}
    for name, ts in channels.items():
        k0 = int(round((start - ts.start_time) * ts.rate))
        if k0 < 0 or k0 + n_keep > len(ts):
            raise SchemaError(f"{name}: recording does not cover the labelled span")
        out[name] = TimeSeries(name, ts.start_time + k0 / ts.rate, ts.rate, ts.values[k0:k0 + n_keep])
    return out


def extract_raw_session(raw: RawSession, out_rate: float = 10.0):
    """Feature channels of a generated session, cropped to its labelled span."""
    phys, badge = extract_features(raw.eda, raw.ppg, raw.accel, raw.audio_front, raw.audio_back,
                                   out_rate)
    return (crop_to_segments(phys, raw.segments, out_rate),
            crop_to_segments(badge, raw.segments, out_rate))


def write_raw_streams(directory, raw: RawSession):
    directory = Path(directory)
    if raw.eda.rate != raw.ppg.rate or len(raw.eda) != len(raw.ppg):
        raise SchemaError("physio_raw.csv needs EDA and PPG on one sample grid")
    directory.mkdir(parents=True, exist_ok=True)
    write_channels_csv(directory / "physio_raw.csv", raw.eda.timestamps,
                       {"eda": raw.eda.values, "ppg": raw.ppg.values})
    acc = raw.accel
    t = acc.start_time + np.arange(len(acc)) / acc.rate
    write_channels_csv(directory / "accel.csv", t, {"ax_g": acc.ax, "ay_g": acc.ay, "az_g": acc.az})
    for name, ts in (("audio_front.csv", raw.audio_front), ("audio_back.csv", raw.audio_back)):
        write_channels_csv(directory / name, ts.timestamps, {"sample": ts.values})


def read_raw_streams(directory):
    """(eda, ppg, accel, front, back) from the raw stream files of a session."""
    directory = Path(directory)
    for name in RAW_FILES:
        if not (directory / name).is_file():
            raise SchemaError(f"{directory}: missing {name}")
    try:
        physio = read_channels_csv(directory / "physio_raw.csv")
        accel = read_channels_csv(directory / "accel.csv")
        ax, ay, az = accel["ax_g"], accel["ay_g"], accel["az_g"]
        stream = AccelStream(ax.rate, ax.values, ay.values, az.values, ax.start_time)
        front = read_channels_csv(directory / "audio_front.csv")["sample"]
        back = read_channels_csv(directory / "audio_back.csv")["sample"]
        return (physio["eda"].with_values(physio["eda"].values, channel_name="eda"),
                physio["ppg"], stream, front, back)
    except KeyError as exc:
        raise SchemaError(f"{directory}: raw stream file lacks column {exc}") from None


def extract_session_dir(directory, out_rate: float = 10.0):
    """Rebuild ``phys.csv`` and ``badge.csv`` from the raw streams in ``directory``."""
    directory = Path(directory)
    segments = read_segments_csv(directory / "segments.csv")
    phys, badge = extract_features(*read_raw_streams(directory), out_rate=out_rate)
    phys = crop_to_segments(phys, segments, out_rate)
    badge = crop_to_segments(badge, segments, out_rate)
    write_session(directory, directory.name, phys, badge, segments)


# --- cohort generation -----------------------------------------------------

def _generate_one(args):
    config, index, pid, out, raw_streams = args
    raw = generate_session(participant_timeline(config, index), config, pid)
    phys, badge = extract_raw_session(raw)
    directory = Path(out) / pid
    write_session(directory, pid, phys, badge, raw.segments)
    if raw_streams:
        write_raw_streams(directory, raw)
    return pid, raw.params


def _pool_map(fn, jobs, items):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def generate_cohort_dir(config: GeneratorConfig, out, jobs: int = 1, raw_streams: bool = False) -> Path:
    """Write one session directory per participant plus ``manifest.json``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    items = [(config, k, pid, str(out), raw_streams)
             for k, pid in enumerate(participant_ids(config.cohort_size))]
    params = dict(_pool_map(_generate_one, jobs, items))
    write_manifest(out / "manifest.json", manifest(config, params))
    return out


def cohort_sessions(cohort) -> list:
    """Participant directories in cohort order (manifest order when present)."""
    cohort = Path(cohort)
    if not cohort.is_dir():
        raise SchemaError(f"{cohort}: not a directory")
    mpath = cohort / "manifest.json"
    if mpath.is_file():
        try:
            ids = list(json.loads(mpath.read_text(encoding="utf-8"))["participants"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SchemaError(f"{mpath}: malformed manifest ({exc})") from None
        ids.sort(key=_participant_key)
        dirs = [cohort / pid for pid in ids]
    else:
        dirs = sorted((p for p in cohort.iterdir() if (p / "segments.csv").is_file()),
                      key=lambda p: _participant_key(p.name))
    if not dirs:
        raise SchemaError(f"{cohort}: no participant sessions found")
    return dirs


def _participant_key(name: str):
    digits = "".join(ch for ch in name if ch.isdigit())
    return (int(digits) if digits else 0, name)


def load_dataset(directory) -> LabeledDataset:
    return read_session(directory).fuse()


# --- training and evaluation -----------------------------------------------

def build_model(config: ExperimentConfig, X, y, feature_names):
    """Fit the configured classifier on scaled rows."""
    if config.classifier == "adaboost":
        return StumpBoostClassifier(config.T, list(feature_names)).fit(X, y), {}
    if config.classifier == "svm_linear":
        model = LinearSVMClassifier(config.C, random_state=config.seed).fit(X, y)
        return model, {"solver": model.solver_}
    # the violating-pair tolerance alone; certifying the objective of every cohort-scale
    # fit costs several times more and leaves the predictions unchanged
    spec, table = grid_search_cv(X, y, config.C_grid, config.gamma_grid, config.folds,
                                 config.seed, config.cv_max_rows, objective_tol=None)
    model = SMOClassifier("rbf", spec.C, spec.gamma, objective_tol=None).fit(X, y)
    return model, {"C": spec.C, "gamma": spec.gamma, "cv_accuracy": table[(spec.C, spec.gamma)]}


def run_participant(data: LabeledDataset, config: ExperimentConfig):
    """Split, scale, train and evaluate one personalised classifier.

    Returns the result record, the fitted bundle and a trace over the whole session.
    """
    cols = feature_indices(config.modality)
    names = [FEATURE_NAMES[j] for j in cols]
    X = data.X[:, cols]
    train_idx, test_idx = stratified_split_indices(data.y, config.train_fraction, config.seed)
    scaler = RangeScaler().fit(X[train_idx])
    model, extras = build_model(config, scaler.transform(X[train_idx]), data.y[train_idx], names)
    bundle = ModelBundle(model, scaler, names, data.participant_id)

    y_test = data.y[test_idx]
    cm, _ = evaluate(bundle.predict(X[test_idx]), y_test)
    stress_share = float(np.mean(y_test == STRESS))
    ranking = model.ranked_features(config.top_k) if config.classifier == "adaboost" else []
    result = ParticipantResult(data.participant_id, cm, ranking, len(train_idx), len(test_idx),
                               max(stress_share, 1.0 - stress_share), extras)
    trace = prediction_trace(bundle.predict(X), data.y, data.timestamps, data.tasks)
    return result, bundle, trace


def _run_one(args):
    directory, config = args
    return run_participant(load_dataset(directory), config)


def run_experiment(config: ExperimentConfig, cohort, out=None) -> EvaluationReport:
    """Run every participant of ``cohort``; with ``out`` also write models, traces and report.json."""
    dirs = cohort_sessions(cohort)
    outputs = _pool_map(_run_one, config.jobs, [(d, config) for d in dirs])
    report = EvaluationReport([r for r, _, _ in outputs], config.to_dict(), config.top_k)
    if out is not None:
        out = Path(out)
        for sub in ("models", "traces"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        for result, bundle, trace in outputs:
            pid = result.participant_id
            save_model(out / "models" / f"{pid}.json", bundle)
            tmp = out / "traces" / f"{pid}.csv.partial"
            trace.write_csv(tmp)
            os.replace(tmp, out / "traces" / f"{pid}.csv")
        atomic_write_text(out / "report.json", report.to_json())
        atomic_write_text(out / "ranking.csv", ranking_csv(report))
    return report


def ranking_csv(report: EvaluationReport) -> str:
    lines = ["participant_id," + ",".join(f"rank{k + 1}" for k in range(report.top_k))]
    for p in report.participants:
        lines.append(",".join([p.participant_id] + list(p.ranking)))
    lines.append("")
    lines.append("feature,percent")
    lines.extend(f"{f},{pct:.4f}" for f, pct in report.ranking)
    return "\n".join(lines) + "\n"


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
