"""Physiological features from raw EDA and PPG channels.

Everything is derived at the acquisition rate and only then block-averaged
down to the feature rate, so the 35 Hz PPG band never aliases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .data import TimeSeries
from .errors import ConfigurationError

NN_RANGE = (0.3, 2.0)
# an interval this close to the upper bound counts as a skipped beat
NN_EDGE_TOL = 0.01
REFRACTORY_S = 0.3
TEMPLATE_BEATS = 8
TEMPLATE_POINTS = 64


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    cutoff: float | tuple
    order: int = 2
    zero_phase: bool = True

    def __post_init__(self):
        if self.kind not in ("low_pass", "band_pass"):
            raise ConfigurationError(f"unknown filter kind {self.kind!r}")
        if self.order < 1:
            raise ConfigurationError("filter order must be positive")
        if self.kind == "band_pass":
            low, high = self.cutoff
            if not 0 < low < high:
                raise ConfigurationError("band-pass needs 0 < low_cut < high_cut")
        elif not self.cutoff > 0:
            raise ConfigurationError("cutoff must be positive")

    def sos(self, rate: float) -> np.ndarray:
        nyquist = rate / 2.0
        edges = np.atleast_1d(self.cutoff).astype(float)
        if np.any(edges >= nyquist):
            raise ConfigurationError(
                f"{self.kind} cutoff {self.cutoff} Hz is not below Nyquist ({nyquist} Hz)")
        btype = "lowpass" if self.kind == "low_pass" else "bandpass"
        wn = edges[0] if self.kind == "low_pass" else edges
        return signal.butter(self.order, wn, btype=btype, fs=rate, output="sos")

    def magnitude(self, freqs, rate: float) -> np.ndarray:
        """Analytic gain of the filter as applied (squared when run forward-backward)."""
        _, h = signal.sosfreqz(self.sos(rate), worN=np.atleast_1d(freqs), fs=rate)
        gain = np.abs(h)
        return gain ** 2 if self.zero_phase else gain

    def apply(self, values, rate: float) -> np.ndarray:
        sos = self.sos(rate)
        values = np.asarray(values, dtype=float)
        if self.zero_phase:
            return signal.sosfiltfilt(sos, values)
        return signal.sosfilt(sos, values)


EDA_FILTER = FilterSpec("low_pass", 0.5)
PPG_FILTER = FilterSpec("band_pass", (0.5, 35.0))


def low_pass_eda(raw: TimeSeries, spec: FilterSpec = EDA_FILTER) -> TimeSeries:
    return raw.with_values(spec.apply(raw.values, raw.rate), channel_name="eda_f")


def band_pass_ppg(raw: TimeSeries, spec: FilterSpec = PPG_FILTER) -> TimeSeries:
    return raw.with_values(spec.apply(raw.values, raw.rate), channel_name="ppg_filtered")


def downsample(series: TimeSeries, out_rate: float) -> TimeSeries:
    """Block-average down to ``out_rate``; the rate ratio must be an integer."""
    ratio = series.rate / out_rate
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * ratio:
        raise ConfigurationError(
            f"cannot downsample {series.rate} Hz to {out_rate} Hz: ratio {ratio} is not an integer")
    n = len(series) // m
    blocks = series.values[: n * m].reshape(n, m)
    return TimeSeries(series.channel_name, series.start_time, out_rate, blocks.mean(axis=1))


@dataclass(frozen=True)
class BeatSequence:
    beat_times: np.ndarray
    source_rate: float

    def __len__(self):
        return len(self.beat_times)

    def intervals(self):
        """Inter-beat intervals, their end times, and the normal-range mask."""
        times = np.asarray(self.beat_times, dtype=float)
        ibi = np.diff(times)
        low, high = NN_RANGE
        normal = (ibi >= low) & (ibi <= high - NN_EDGE_TOL)
        return ibi, times[1:], normal

    @property
    def n_rejected(self) -> int:
        return int(np.sum(~self.intervals()[2]))


def detect_beats(filtered_ppg: TimeSeries, min_prominence: float = 0.3) -> BeatSequence:
    """Locate the dominant pulse peaks of a band-passed PPG.

    Peaks must be at least ``REFRACTORY_S`` apart and rise above their
    surroundings by ``min_prominence`` of the signal's robust range.
    """
    x = filtered_ppg.values
    rate = filtered_ppg.rate
    if len(x) < 3:
        return BeatSequence(np.empty(0), rate)
    lo, hi = np.percentile(x, [1, 99])
    spread = hi - lo
    if not spread > 0:
        return BeatSequence(np.empty(0), rate)
    peaks, _ = signal.find_peaks(x, distance=max(1, int(round(REFRACTORY_S * rate))),
                                 prominence=min_prominence * spread)
    peaks = peaks[(peaks > 0) & (peaks < len(x) - 1)]
    left, mid, right = x[peaks - 1], x[peaks], x[peaks + 1]
    denom = left - 2 * mid + right
    safe = np.where(denom != 0, denom, 1.0)
    offset = np.where(denom != 0, 0.5 * (left - right) / safe, 0.0)
    times = filtered_ppg.start_time + (peaks + np.clip(offset, -0.5, 0.5)) / rate
    return BeatSequence(times, rate)


def _grid(start_time, n_samples, rate):
    return start_time + np.arange(n_samples) / rate


def compute_hrv(beats: BeatSequence, window: float = 30.0, out_rate: float = 10.0,
                start_time: float = 0.0, n_samples: int | None = None) -> TimeSeries:
    """SDNN over a trailing window, sampled on a regular grid.

    Each tick uses the normal intervals whose closing beat lies in
    ``(t - window, t]``.  With fewer than two such intervals the previous
    value is held (zero before the first valid one).
    """
    if n_samples is None:
        end = beats.beat_times[-1] if len(beats) else start_time
        n_samples = int(np.floor((end - start_time) * out_rate)) + 1
    ticks = _grid(start_time, n_samples, out_rate)
    out = np.zeros(n_samples)
    if len(beats) < 3:
        return TimeSeries("hrv", start_time, out_rate, out)

    ibi, ends, normal = beats.intervals()
    ibi, ends = ibi[normal], ends[normal]
    hi = np.searchsorted(ends, ticks, side="right")
    lo = np.searchsorted(ends, ticks - window, side="right")
    valid = hi - lo >= 2
    if not np.any(valid):
        return TimeSeries("hrv", start_time, out_rate, out)

    # window bounds are monotone in time, so equal windows form contiguous runs
    vlo, vhi = lo[valid], hi[valid]
    starts = np.flatnonzero(np.r_[True, (np.diff(vlo) != 0) | (np.diff(vhi) != 0)])
    sdnn = np.array([np.std(ibi[vlo[s]: vhi[s]]) for s in starts])
    run_of = np.cumsum(np.r_[True, (np.diff(vlo) != 0) | (np.diff(vhi) != 0)]) - 1
    # hold the last valid value forward
    last = np.where(valid, np.arange(n_samples), -1)
    np.maximum.accumulate(last, out=last)
    filled = np.zeros(n_samples)
    filled[valid] = sdnn[run_of]
    out = np.where(last >= 0, filled[np.maximum(last, 0)], 0.0)
    return TimeSeries("hrv", start_time, out_rate, out)


def _normalized_correlation(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom <= 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def beat_segments(filtered_ppg: TimeSeries, beats: BeatSequence):
    """Resampled beat-to-beat pulse segments and the time each one completes."""
    x = filtered_ppg.values
    rate = filtered_ppg.rate
    ibi, ends, normal = beats.intervals()
    idx = np.round((np.asarray(beats.beat_times) - filtered_ppg.start_time) * rate).astype(int)
    grid = np.linspace(0.0, 1.0, TEMPLATE_POINTS)
    segments, done = [], []
    for k in np.flatnonzero(normal):
        a, b = idx[k], idx[k + 1]
        if a < 0 or b >= len(x) or b - a < 2:
            continue
        seg = x[a: b + 1]
        segments.append(np.interp(grid, np.linspace(0.0, 1.0, len(seg)), seg))
        done.append(ends[k])
    return np.array(segments).reshape(-1, TEMPLATE_POINTS), np.array(done)


def ppg_template_similarity(filtered_ppg: TimeSeries, beats: BeatSequence,
                            out_rate: float | None = None, n_samples: int | None = None) -> TimeSeries:
    """Correlation of each completed pulse with the mean of the preceding eight.

    The value is held until the next pulse completes; 0 before any comparison.
    """
    out_rate = out_rate or filtered_ppg.rate
    if n_samples is None:
        n_samples = int(np.floor(len(filtered_ppg) * out_rate / filtered_ppg.rate))
    ticks = _grid(filtered_ppg.start_time, n_samples, out_rate)
    segments, done = beat_segments(filtered_ppg, beats)
    scores = np.zeros(len(segments))
    for k in range(1, len(segments)):
        template = segments[max(0, k - TEMPLATE_BEATS): k].mean(axis=0)
        scores[k] = _normalized_correlation(segments[k], template)
    held = np.searchsorted(done, ticks, side="right") - 1
    out = np.where(held >= 0, scores[np.maximum(held, 0)] if len(scores) else 0.0, 0.0)
    return TimeSeries("ppg_t", filtered_ppg.start_time, out_rate, out)


def extract_physio_features(eda_raw: TimeSeries, ppg_raw: TimeSeries, out_rate: float = 10.0,
                            eda_filter: FilterSpec = EDA_FILTER, ppg_filter: FilterSpec = PPG_FILTER,
                            hrv_window: float = 30.0) -> dict:
    """The five physiological channels at ``out_rate``."""
    eda_f = low_pass_eda(eda_raw, eda_filter)
    ppg_f = band_pass_ppg(ppg_raw, ppg_filter)
    beats = detect_beats(ppg_f)
    native = ppg_raw.rate
    hrv = compute_hrv(beats, hrv_window, native, ppg_raw.start_time, len(ppg_raw))
    ppg_t = ppg_template_similarity(ppg_f, beats, native, len(ppg_raw))
    channels = {
        "eda": eda_raw.with_values(eda_raw.values, channel_name="eda"),
        "eda_f": eda_f,
        "ppg": ppg_raw.with_values(ppg_raw.values, channel_name="ppg"),
        "ppg_t": ppg_t,
        "hrv": hrv,
    }
    return {name: downsample(ts, out_rate) for name, ts in channels.items()}
