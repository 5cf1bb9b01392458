"""Sociometric badge features from the accelerometer and the two microphones.

The badge firmware is not documented, so each feature is a direct reading
of its one-line definition; every tunable constant lives in ``BadgeConfig``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import TimeSeries
from .errors import AlignmentError, ConfigurationError
from .physio import FilterSpec

MIN_FRAME = 64


@dataclass(frozen=True)
class BadgeConfig:
    frame_duration: float = 0.1
    noise_factor: float = 3.0
    noise_window: float = 5.0
    noise_percentile: float = 10.0
    # absolute floor so digital silence never reads as speech
    min_noise_floor: float = 1e-4
    pitch_range: tuple = (50.0, 400.0)
    min_periodicity: float = 0.3
    posture_filter: FilterSpec = field(default_factory=lambda: FilterSpec("low_pass", 0.5))


@dataclass(frozen=True)
class AccelStream:
    rate: float
    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        axes = [np.asarray(a, dtype=float) for a in (self.ax, self.ay, self.az)]
        if not (len(axes[0]) == len(axes[1]) == len(axes[2])):
            raise ConfigurationError("accelerometer axes differ in length")
        for name, a in zip(("ax", "ay", "az"), axes):
            if not np.all(np.isfinite(a)):
                raise ConfigurationError(f"non-finite accelerometer values in {name}")
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.ax)


@dataclass(frozen=True)
class AudioFrame:
    mic: str
    samples: np.ndarray
    rate: float
    frame_start: float


def _tick_bounds(n_samples, rate, out_rate):
    n_ticks = int(np.floor(n_samples * out_rate / rate + 1e-9))
    edges = np.floor(np.arange(n_ticks + 1) * rate / out_rate + 1e-9).astype(int)
    return n_ticks, edges


def _tick_mean(values, rate, out_rate):
    n_ticks, edges = _tick_bounds(len(values), rate, out_rate)
    if n_ticks == 0:
        return np.empty(0)
    sums = np.add.reduceat(values[: edges[-1]], edges[:-1])
    return sums / np.diff(edges)


def _first_diff(x, scale):
    out = np.zeros_like(x)
    out[1:] = (x[1:] - x[:-1]) * scale
    return out


def _second_diff(x, scale):
    out = np.zeros_like(x)
    out[2:] = (x[2:] - 2 * x[1:-1] + x[:-2]) * scale
    return out


def movement_features(accel: AccelStream, out_rate: float = 10.0) -> dict:
    """Body-movement magnitude and the first/second change of its energy."""
    if accel.rate < out_rate:
        raise ConfigurationError("accelerometer rate below feature rate")
    energy = _tick_mean(accel.ax ** 2 + accel.ay ** 2 + accel.az ** 2, accel.rate, out_rate)
    bm = np.sqrt(energy)  # axes are in g, so this is already relative to 1 g
    return {
        "bm": TimeSeries("bm", accel.start_time, out_rate, bm),
        "bm_act": TimeSeries("bm_act", accel.start_time, out_rate,
                             np.abs(_first_diff(energy, out_rate))),
        "bm_r": TimeSeries("bm_r", accel.start_time, out_rate,
                           _second_diff(energy, out_rate ** 2)),
    }


def posture_features(accel: AccelStream, out_rate: float = 10.0,
                     config: BadgeConfig = BadgeConfig()) -> dict:
    """Badge tilt angles (degrees) and the speed/acceleration of the total tilt."""
    # gravity per tick first: angles of raw samples wrap whenever shaking flips the sign of az
    gx, gy, gz = (_tick_mean(a, accel.rate, out_rate) for a in (accel.ax, accel.ay, accel.az))
    angles = (("pos_lr", np.arctan2(gx, gz)), ("pos_fb", np.arctan2(gy, gz)),
              ("tilt", np.arctan2(np.hypot(gx, gy), gz)))
    smoothed = {}
    for name, angle in angles:
        per_tick = np.degrees(angle)
        if len(per_tick) > 9:
            per_tick = config.posture_filter.apply(per_tick, out_rate)
        smoothed[name] = per_tick
    tilt = smoothed.pop("tilt")
    out = {name: TimeSeries(name, accel.start_time, out_rate, v) for name, v in smoothed.items()}
    out["pos_act"] = TimeSeries("pos_act", accel.start_time, out_rate,
                                np.abs(_first_diff(tilt, out_rate)))
    out["pos_r"] = TimeSeries("pos_r", accel.start_time, out_rate,
                              _second_diff(tilt, out_rate ** 2))
    return out


def frame_matrix(frames) -> tuple:
    """Stack AudioFrames (or pass an array through) as ``(frames, starts, rate)``."""
    if isinstance(frames, tuple) and len(frames) == 3:
        return frames
    frames = list(frames)
    if not frames:
        return np.empty((0, 0)), np.empty(0), None
    rate = frames[0].rate
    length = len(frames[0].samples)
    if any(f.rate != rate or len(f.samples) != length for f in frames):
        raise ConfigurationError("frames differ in rate or length")
    return (np.array([f.samples for f in frames], dtype=float),
            np.array([f.frame_start for f in frames], dtype=float), rate)


def split_frames(samples, rate: float, start_time: float = 0.0, frame_duration: float = 0.1):
    """Cut a continuous recording into non-overlapping frames.

    Returns ``(frames, starts, rate)`` as accepted by the feature functions.
    """
    length = int(round(rate * frame_duration))
    if length < 1:
        raise ConfigurationError("frame shorter than one sample")
    samples = np.asarray(samples, dtype=float)
    n = len(samples) // length
    frames = samples[: n * length].reshape(n, length)
    starts = start_time + np.arange(n) * length / rate
    return frames, starts, rate


def adaptive_voicing(volume, frame_rate: float, config: BadgeConfig = BadgeConfig()) -> np.ndarray:
    """1 where the volume clears ``noise_factor`` times the trailing noise floor."""
    volume = np.asarray(volume, dtype=float)
    if len(volume) == 0:
        return np.zeros(0)
    width = max(1, int(round(config.noise_window * frame_rate)))
    padded = np.concatenate([np.full(width - 1, np.nan), volume])
    windows = sliding_window_view(padded, width)
    floor = np.nanpercentile(windows, config.noise_percentile, axis=1)
    floor = np.maximum(floor, config.min_noise_floor)
    return (volume > config.noise_factor * floor).astype(float)


def speech_activity(front, back, config: BadgeConfig = BadgeConfig(), frame_rate: float | None = None) -> dict:
    """Voicing and volume features for the two microphones on one frame grid."""
    f_frames, f_starts, _ = frame_matrix(front)
    b_frames, b_starts, _ = frame_matrix(back)
    if len(f_starts) != len(b_starts) or not np.allclose(f_starts, b_starts, atol=1e-9):
        raise AlignmentError("front and back microphone frames are on different grids")
    if frame_rate is None:
        frame_rate = 1.0 / config.frame_duration
    start = float(f_starts[0]) if len(f_starts) else 0.0
    vol_f = np.abs(f_frames).mean(axis=1) if f_frames.size else np.zeros(len(f_starts))
    vol_b = np.abs(b_frames).mean(axis=1) if b_frames.size else np.zeros(len(b_starts))
    voiced = adaptive_voicing(vol_f, frame_rate, config)
    values = {
        "voiced": voiced,
        "unvoiced": 1.0 - voiced,
        "vol_f": vol_f,
        "vol_b": vol_b,
        "volc_f": np.abs(_first_diff(vol_f, 1.0)),
        "volc_b": np.abs(_first_diff(vol_b, 1.0)),
    }
    return {name: TimeSeries(name, start, frame_rate, v) for name, v in values.items()}


def spectral_feature_matrix(frames: np.ndarray, rate: float, config: BadgeConfig = BadgeConfig()):
    """Top-4 spectral peaks and autocorrelation pitch for a stack of frames.

    Returns ``(hz, amp, pitch)`` with shapes ``(n, 4)``, ``(n, 4)``, ``(n,)``.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    n, length = frames.shape
    if length < MIN_FRAME:
        raise ConfigurationError(f"frame of {length} samples is shorter than {MIN_FRAME}")

    window = np.hanning(length)
    mag = np.abs(np.fft.rfft(frames * window, axis=1)) * 2.0 / window.sum()
    freqs = np.fft.rfftfreq(length, 1.0 / rate)
    inner = mag[:, 1:-1]
    # ignore round-off ripples far below the strongest bin
    floor = 1e-9 * mag.max(axis=1, keepdims=True)
    is_peak = (inner > mag[:, :-2]) & (inner >= mag[:, 2:]) & (inner > floor)
    scored = np.where(is_peak, inner, -1.0)
    # stable sort keeps the lower frequency first among equal magnitudes
    top = np.argsort(-scored, axis=1, kind="stable")[:, :4]
    top_mag = np.take_along_axis(scored, top, axis=1)
    found = top_mag > 0
    hz = np.where(found, freqs[1:-1][top], 0.0)
    amp = np.where(found, top_mag, 0.0)

    pitch = np.zeros(n)
    low, high = config.pitch_range
    min_lag = int(np.ceil(rate / high))
    max_lag = min(int(np.floor(rate / low)), length - 2)
    if max_lag > min_lag + 1:
        centred = frames - frames.mean(axis=1, keepdims=True)
        spec = np.fft.rfft(centred, 2 * length, axis=1)
        ac = np.fft.irfft(np.abs(spec) ** 2, axis=1)[:, : length]
        energy = ac[:, 0]
        seg = ac[:, min_lag - 1: max_lag + 2]
        core = seg[:, 1:-1]
        local = (core > seg[:, :-2]) & (core >= seg[:, 2:])
        cand = np.where(local, core, -np.inf)
        best = np.argmax(cand, axis=1)
        rows = np.arange(n)
        peak = cand[rows, best]
        ok = np.isfinite(peak) & (energy > 0)
        ok &= peak >= config.min_periodicity * np.where(energy > 0, energy, 1.0)
        left, right = seg[rows, best], seg[rows, best + 2]
        denom = left - 2 * core[rows, best] + right
        shift = np.where(denom != 0, 0.5 * (left - right) / np.where(denom != 0, denom, 1.0), 0.0)
        lag = min_lag + best + np.clip(shift, -0.5, 0.5)
        pitch = np.where(ok, np.clip(rate / lag, low, high), 0.0)
    return hz, amp, pitch


def spectral_features(frame: AudioFrame, config: BadgeConfig = BadgeConfig()) -> dict:
    hz, amp, pitch = spectral_feature_matrix(frame.samples[None, :], frame.rate, config)
    out = {f"hz{k}": float(hz[0, k]) for k in range(4)}
    out.update({f"amp{k}": float(amp[0, k]) for k in range(4)})
    out["pitch"] = float(pitch[0])
    return out


def extract_badge_features(accel: AccelStream, front_audio: TimeSeries, back_audio: TimeSeries,
                           out_rate: float = 10.0, config: BadgeConfig = BadgeConfig()) -> dict:
    """All 31 badge channels at ``out_rate``."""
    if abs(config.frame_duration * out_rate - 1.0) > 1e-9:
        raise ConfigurationError("audio frame duration must equal one feature tick")
    front = split_frames(front_audio.values, front_audio.rate, front_audio.start_time,
                         config.frame_duration)
    back = split_frames(back_audio.values, back_audio.rate, back_audio.start_time,
                        config.frame_duration)
    out = {}
    out.update(movement_features(accel, out_rate))
    out.update(posture_features(accel, out_rate, config))
    out.update(speech_activity(front, back, config, out_rate))
    voiced = out["voiced"].values
    for suffix, (frames, starts, rate) in (("f", front), ("b", back)):
        hz, amp, pitch = spectral_feature_matrix(frames, rate, config)
        start = float(starts[0]) if len(starts) else 0.0
        for k in range(4):
            out[f"hz{k}_{suffix}"] = TimeSeries(f"hz{k}_{suffix}", start, out_rate, hz[:, k])
            out[f"amp{k}_{suffix}"] = TimeSeries(f"amp{k}_{suffix}", start, out_rate, amp[:, k])
        out[f"pitch_{suffix}"] = TimeSeries(f"pitch_{suffix}", start, out_rate, pitch * voiced)
    # posture/movement and audio grids can differ by a tick at the very end
    n = min(len(ts) for ts in out.values())
    return {name: ts.with_values(ts.values[:n]) for name, ts in out.items()}
