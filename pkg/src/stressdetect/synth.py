"""Synthetic TSST sessions with planted stress effects.

The generator produces raw sensor streams (EDA and PPG at 1000 Hz, a 50 Hz
accelerometer, two microphones) plus the ground-truth task segments.  Every
stress effect is multiplied by ``separability``: at 0 the stress and neutral
segments come from the same processes.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from .badge import AccelStream
from .data import LABEL_NAMES, NEUTRAL, STRESS, TaskSegment, TimeSeries

FEATURE_RATE = 10.0

# (participant, total, stress, neutral) sample counts at 10 Hz
TABLE2_COUNTS = (
    ("P1", 12800, 8200, 4600), ("P2", 11620, 8400, 3220), ("P3", 13550, 8350, 5200),
    ("P4", 13450, 8460, 4990), ("P5", 13740, 8760, 4980), ("P6", 13000, 8310, 4690),
    ("P7", 15940, 8600, 7340), ("P8", 13610, 7810, 5800), ("P9", 12900, 8420, 4480),
    ("P10", 14200, 8900, 5300), ("P11", 15680, 8660, 7020), ("P12", 13530, 8660, 4870),
    ("P13", 14120, 8560, 5560), ("P14", 13900, 8810, 5090), ("P15", 13350, 8350, 5000),
    ("P16", 14500, 8800, 5700), ("P17", 13480, 8760, 4720), ("P18", 14040, 8820, 5220),
)
TABLE2_MEAN_STRESS = 8535
TABLE2_MEAN_NEUTRAL = 5210

TASK_ORDER = ("NT1", "PP", "PS", "CG", "PAD", "NT2")
TASK_LABELS = {"NT1": NEUTRAL, "PP": STRESS, "PS": STRESS, "CG": STRESS,
               "PAD": NEUTRAL, "NT2": NEUTRAL}
# whether the participant talks during the task
TASK_SPEECH = {"NT1": 1.0, "PP": 0.0, "PS": 1.0, "CG": 1.0, "PAD": 0.0, "NT2": 1.0}


@dataclass(frozen=True)
class TsstTimeline:
    """Task durations in seconds; each must be a whole number of feature ticks."""

    NT1: float = 120.0
    PP: float = 180.0
    PS: float = 300.0
    CG: float = 300.0
    PAD: float = 0.0
    NT2: float = 120.0

    @classmethod
    def from_counts(cls, stress_samples: int, neutral_samples: int, rate: float = FEATURE_RATE,
                    base: "TsstTimeline | None" = None) -> "TsstTimeline":
        """Stretch the stress tasks and size the neutral pad to hit the given counts.

        PP, PS and CG keep their nominal proportions; NT1 and NT2 keep their
        length and PAD absorbs the remaining neutral time.
        """
        base = base or cls()
        stress_ticks = [round(getattr(base, t) * rate) for t in ("PP", "PS", "CG")]
        scale = stress_samples / sum(stress_ticks)
        pp, ps = (int(math.floor(k * scale)) for k in stress_ticks[:2])
        cg = stress_samples - pp - ps
        nt1, nt2 = round(base.NT1 * rate), round(base.NT2 * rate)
        pad = neutral_samples - nt1 - nt2
        if pad < 0:
            raise ValueError("neutral count smaller than the two neutral tasks")
        return cls(nt1 / rate, pp / rate, ps / rate, cg / rate, pad / rate, nt2 / rate)

    def ticks(self, rate: float = FEATURE_RATE) -> dict:
        return {t: int(round(getattr(self, t) * rate)) for t in TASK_ORDER}

    def segments(self, rate: float = FEATURE_RATE) -> list:
        out, start = [], 0
        for task, n in self.ticks(rate).items():
            if n > 0:
                out.append(TaskSegment(task, start / rate, (start + n) / rate, TASK_LABELS[task]))
                start += n
        return out

    def label_counts(self, rate: float = FEATURE_RATE) -> dict:
        ticks = self.ticks(rate)
        stress = sum(n for t, n in ticks.items() if TASK_LABELS[t] == STRESS)
        neutral = sum(n for t, n in ticks.items() if TASK_LABELS[t] == NEUTRAL)
        return {"stress": stress, "neutral": neutral, "total": stress + neutral}


def jitter_timeline(timeline: TsstTimeline, rng, seconds: float, rate: float = FEATURE_RATE):
    """Move up to ``seconds`` between neighbouring tasks of the same label.

    Class totals stay fixed, so jittered sessions keep their target counts.
    """
    if seconds <= 0:
        return timeline
    ticks = timeline.ticks(rate)
    limit = int(round(seconds * rate))
    for a, b in (("PP", "PS"), ("PS", "CG"), ("PAD", "NT2")):
        shift = int(rng.integers(-limit, limit + 1))
        shift = max(-ticks[a] + 1, min(shift, ticks[b] - 1)) if ticks[a] and ticks[b] else 0
        ticks[a] += shift
        ticks[b] -= shift
    return TsstTimeline(**{t: n / rate for t, n in ticks.items()})


DEFAULT_EFFECTS = {
    # tonic EDA rise under stress, in units of the typical response amplitude
    "eda_level": 0.6,
    # relative increase of the skin-conductance-response rate
    "scr_rate": 0.3,
    # heart-rate increase in beats per minute
    "heart_rate": 1.0,
    # relative drop of inter-beat-interval variability
    "ibi_variability": 0.02,
    # relative drop of the pulse amplitude
    "ppg_amplitude": 0.02,
    # relative increase of movement-burst rate
    "movement": 4.0,
    # relative increase of posture-change rate
    "posture": 5.0,
    # blend of the task speaking schedule into the speech process
    "speech_schedule": 1.0,
    # relative increase of voice loudness
    "voice_volume": 1.5,
    # rise of the fundamental frequency in Hz
    "voice_pitch": 50.0,
}

# tonic EDA level and posture activity dominate; used to check that rankings recover them
RANKING_EFFECTS = dict(DEFAULT_EFFECTS, eda_level=1.0, posture=30.0, movement=1.0,
                       voice_volume=0.5, voice_pitch=15.0, speech_schedule=0.3)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    separability: float = 1.0
    cohort_size: int = 18
    effects: dict = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    # per-participant multiplicative spread of baselines and effect sizes
    participant_jitter: float = 0.25
    # electrode contact noise on the raw EDA in microsiemens
    eda_contact_noise: float = 0.05
    timing_jitter: float = 5.0
    # unlabelled recording before and after the protocol (sensors being fitted and
    # removed); feature warm-ups and filter edges fall here instead of on NT1/NT2
    recording_margin: float = 60.0
    # "table2" reproduces each participant's published counts, "protocol" uses nominal durations
    counts: str = "table2"
    eda_rate: float = 1000.0
    ppg_rate: float = 1000.0
    accel_rate: float = 50.0
    audio_rate: float = 4000.0

    def __post_init__(self):
        if not 0.0 <= self.separability <= 1.0:
            raise ValueError("separability must lie in [0, 1]")
        if self.cohort_size < 1:
            raise ValueError("cohort size must be at least 1")
        unknown = set(self.effects) - set(DEFAULT_EFFECTS)
        if unknown:
            raise ValueError(f"unknown effects: {sorted(unknown)}")
        if self.counts not in ("table2", "protocol"):
            raise ValueError("counts must be 'table2' or 'protocol'")
        if self.recording_margin < 0:
            raise ValueError("recording margin must be non-negative")

    def effect(self, name: str) -> float:
        return self.effects.get(name, 0.0) * self.separability


@dataclass
class RawSession:
    participant_id: str
    segments: list
    eda: TimeSeries
    ppg: TimeSeries
    accel: AccelStream
    audio_front: TimeSeries
    audio_back: TimeSeries
    params: dict

    @property
    def duration(self) -> float:
        return self.segments[-1].end


def participant_seed(seed: int, participant_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{participant_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _stress_profile(segments, rate, n):
    """0/1 stress indicator and the task index for every sample."""
    stress = np.zeros(n)
    task_idx = np.zeros(n, dtype=int)
    for seg in segments:
        a, b = int(round(seg.start * rate)), int(round(seg.end * rate))
        stress[a:b] = 1.0 if seg.label == STRESS else 0.0
        task_idx[a:b] = TASK_ORDER.index(seg.task)
    return stress, task_idx


def _smooth_noise(rng, n, rate, cutoff, std):
    """Gaussian noise low-passed at ``cutoff`` Hz and rescaled to ``std``."""
    if std == 0 or n == 0:
        return np.zeros(n)
    # synthesise at a coarse rate and interpolate; the content is far below it
    coarse_rate = max(4.0 * cutoff * 4, 1.0)
    m = int(math.ceil(n / rate * coarse_rate)) + 8
    white = rng.standard_normal(m)
    sos = signal.butter(2, cutoff, fs=coarse_rate, output="sos")
    slow = signal.sosfiltfilt(sos, white)
    slow /= slow.std() or 1.0
    t = np.arange(n) / rate
    return std * np.interp(t, np.arange(m) / coarse_rate, slow)


def _poisson_events(rng, rate_fn_values, sample_rate):
    """Event sample indices for a time-varying rate given per sample (events/s)."""
    p = np.clip(rate_fn_values / sample_rate, 0.0, 1.0)
    return np.flatnonzero(rng.random(len(p)) < p)


def _generate_eda(rng, cfg, params, stress, rate):
    n = len(stress)
    # constant tonic level; the stress shift is sized against the typical response
    level = params["eda_tonic"] + cfg.effect("eda_level") * params["scr_amp"] * stress
    scr_rate = params["scr_per_min"] / 60.0 * (1.0 + cfg.effect("scr_rate") * stress)
    onsets = _poisson_events(rng, scr_rate, rate)
    impulses = np.zeros(n)
    impulses[onsets] = rng.lognormal(math.log(params["scr_amp"]), 0.4, len(onsets))
    t = np.arange(int(20 * rate)) / rate
    kernel = np.exp(-t / 3.0) - np.exp(-t / 0.7)
    kernel /= kernel.max()
    phasic = signal.fftconvolve(impulses, kernel)[:n]
    # electrode contact noise, too fast to carry session-position information
    contact = _smooth_noise(rng, n, rate, 1.0, cfg.eda_contact_noise * params["eda_noise"])
    return level + phasic + contact + rng.normal(0.0, 0.01, n)


def _generate_beats(rng, cfg, params, segments, duration):
    """Beat times whose rate rises and variability drops under stress.

    Most of the interval variability is respiratory sinus arrhythmia, so a
    half-minute standard deviation is steady while nothing changes.
    """
    beats = [0.3 + rng.random() * 0.5]
    ends = np.array([s.end for s in segments])
    labels = np.array([s.label for s in segments])
    breath_phase = rng.random() * 2 * math.pi
    breath_rate = params["breath_rate"]
    while beats[-1] < duration:
        t = beats[-1]
        k = min(int(np.searchsorted(ends, t, side="right")), len(segments) - 1)
        s = 1.0 if labels[k] == STRESS else 0.0
        hr = params["heart_rate"] + cfg.effect("heart_rate") * s
        sd = params["ibi_sd"] * (1.0 - cfg.effect("ibi_variability") * s)
        ibi = 60.0 / hr
        # the breathing cycle advances by one interval at a steady rate
        breath_phase += 2 * math.pi * breath_rate * ibi
        ibi += math.sqrt(2.0) * sd * math.sin(breath_phase) + 0.1 * sd * rng.standard_normal()
        beats.append(t + min(max(ibi, 0.4), 1.6))
    return np.array(beats[:-1])


def _pulse_shape(rate, params):
    t = np.arange(int(0.8 * rate)) / rate
    systolic = np.exp(-0.5 * ((t - 0.12) / 0.045) ** 2)
    dicrotic = params["dicrotic"] * np.exp(-0.5 * ((t - 0.34) / 0.06) ** 2)
    return systolic + dicrotic


def _generate_ppg(rng, cfg, params, segments, stress, rate):
    n = len(stress)
    beats = _generate_beats(rng, cfg, params, segments, n / rate)
    idx = np.round(beats * rate).astype(int)
    idx = idx[idx < n]
    amp = params["ppg_amp"] * (1.0 - cfg.effect("ppg_amplitude") * stress[idx])
    amp = amp * (1.0 + 0.05 * rng.standard_normal(len(idx)))
    impulses = np.zeros(n)
    impulses[idx] = amp
    pulses = signal.fftconvolve(impulses, _pulse_shape(rate, params))[:n]
    t = np.arange(n) / rate
    breathing = 0.1 * params["ppg_amp"] * np.sin(2 * np.pi * 0.25 * t + rng.random() * 6.28)
    return pulses + breathing + rng.normal(0.0, 0.02 * params["ppg_amp"], n), beats


def _raised_cosine_bumps(rng, n, rate, onsets, durations, amplitudes):
    out = np.zeros(n)
    for start, dur, amp in zip(onsets, durations, amplitudes):
        m = max(2, int(dur * rate))
        stop = min(n, start + m)
        bump = 0.5 * (1 - np.cos(2 * np.pi * np.arange(stop - start) / m))
        out[start:stop] += amp * bump
    return out


def _generate_accel(rng, cfg, params, stress, rate):
    n = len(stress)
    posture_rate = params["posture_per_min"] / 60.0 * (1.0 + cfg.effect("posture") * stress)
    angles = []
    for base in (params["lean_lr"], params["lean_fb"]):
        onsets = _poisson_events(rng, posture_rate, rate)
        swing = rng.choice([-1.0, 1.0], len(onsets)) * rng.uniform(4.0, 15.0, len(onsets))
        bumps = _raised_cosine_bumps(rng, n, rate, onsets, rng.uniform(1.0, 3.0, len(onsets)), swing)
        angles.append(np.radians(base + bumps + _smooth_noise(rng, n, rate, 0.3, 1.0)))
    lr, fb = angles
    ax, ay = np.sin(lr) * np.cos(fb), np.sin(fb)
    az = np.cos(lr) * np.cos(fb)

    move_rate = params["moves_per_min"] / 60.0 * (1.0 + cfg.effect("movement") * stress)
    onsets = _poisson_events(rng, move_rate, rate)
    envelope = _raised_cosine_bumps(rng, n, rate, onsets, rng.uniform(0.5, 2.0, len(onsets)),
                                    rng.uniform(0.1, 0.3, len(onsets)))
    sos = signal.butter(2, [0.5, 5.0], btype="bandpass", fs=rate, output="sos")
    shaking = [signal.sosfilt(sos, rng.standard_normal(n)) * 3.0 * envelope for _ in range(3)]
    noise = [rng.normal(0.0, 0.01, n) for _ in range(3)]
    return AccelStream(rate, ax + shaking[0] + noise[0], ay + shaking[1] + noise[1],
                       az + shaking[2] + noise[2])


def _speech_mask(rng, cfg, segments, rate, n):
    """Alternating talk spurts and pauses; talk share follows the task schedule."""
    mask = np.zeros(n, dtype=bool)
    blend = min(1.0, cfg.effect("speech_schedule"))
    for seg in segments:
        share = 0.7 * ((1 - blend) * 0.6 + blend * TASK_SPEECH[seg.task])
        t, end = seg.start, seg.end
        if share <= 0:
            continue
        spurt_mean = 1.5
        pause_mean = spurt_mean * (1 - share) / share
        talking = rng.random() < share
        while t < end:
            length = rng.exponential(spurt_mean if talking else pause_mean) + 0.2
            if talking:
                mask[int(t * rate): int(min(t + length, end) * rate)] = True
            t += length
            talking = not talking
    return mask


def _generate_audio(rng, cfg, params, stress, segments, rate):
    n = len(stress)
    talking = _speech_mask(rng, cfg, segments, rate, n)
    t = np.arange(n) / rate
    f0 = (params["f0"] + cfg.effect("voice_pitch") * stress) * \
        (1.0 + 0.06 * _smooth_noise(rng, n, rate, 0.5, 1.0))
    phase = 2 * np.pi * np.cumsum(f0) / rate
    voice = np.zeros(n)
    for h, weight in enumerate(params["harmonics"], start=1):
        voice += weight * np.sin(h * phase)
    syllables = 0.6 + 0.4 * np.abs(np.sin(2 * np.pi * 2.0 * t + rng.random()))
    loudness = params["voice_level"] * (1.0 + cfg.effect("voice_volume") * stress)
    sos = signal.butter(2, 15.0, fs=rate, output="sos")
    gate = signal.sosfiltfilt(sos, talking.astype(float))
    speech = voice * syllables * loudness * gate
    front = speech + rng.normal(0.0, params["noise_level"], n)
    back = 0.25 * speech + rng.normal(0.0, params["noise_level"], n)
    return front, back


def _participant_params(rng, cfg):
    j = cfg.participant_jitter

    def spread(value):
        return float(value * (1.0 + j * rng.uniform(-1.0, 1.0)))

    n_harm = 5
    harmonics = rng.uniform(0.3, 1.0, n_harm) / np.arange(1, n_harm + 1)
    return {
        "eda_tonic": spread(5.0), "scr_amp": spread(0.15),
        "eda_noise": spread(1.0), "scr_per_min": spread(3.0),
        "heart_rate": spread(75.0), "ibi_sd": spread(0.05), "breath_rate": spread(0.25),
        "ppg_amp": spread(1.0),
        "dicrotic": spread(0.35),
        "posture_per_min": spread(4.0), "moves_per_min": spread(3.0),
        "lean_lr": float(rng.normal(0.0, 5.0)), "lean_fb": float(rng.normal(0.0, 8.0)),
        "f0": spread(160.0), "harmonics": (harmonics / harmonics[0]).tolist(),
        "voice_level": spread(0.2), "noise_level": spread(0.01),
        "effect_scale": {k: spread(1.0) for k in DEFAULT_EFFECTS},
    }


def participant_timeline(cfg: GeneratorConfig, index: int) -> TsstTimeline:
    if cfg.counts == "table2":
        _, _, stress, neutral = TABLE2_COUNTS[index % len(TABLE2_COUNTS)]
        return TsstTimeline.from_counts(stress, neutral)
    pad = (TABLE2_MEAN_STRESS + TABLE2_MEAN_NEUTRAL) / FEATURE_RATE - 1020.0
    return replace(TsstTimeline(), PAD=round(pad * FEATURE_RATE) / FEATURE_RATE)


def generate_session(timeline: TsstTimeline, config: GeneratorConfig, participant_id: str) -> RawSession:
    """Raw streams and ground-truth segments for one synthetic participant.

    The streams start ``recording_margin`` seconds before the first segment
    (at a negative time) and run as long past the last one; the margins hold
    resting physiology and no labels.
    """
    rng = np.random.default_rng(participant_seed(config.seed, participant_id))
    params = _participant_params(rng, config)
    timeline = jitter_timeline(timeline, rng, config.timing_jitter)
    segments = timeline.segments()
    margin = round(config.recording_margin * FEATURE_RATE) / FEATURE_RATE
    # generator clock: 0 is the start of the recording, the protocol begins at ``margin``
    clock = [TaskSegment(g.task, g.start + margin, g.end + margin, g.label) for g in segments]
    if margin > 0:
        end = clock[-1].end
        clock = [TaskSegment("PAD", 0.0, margin, NEUTRAL)] + clock + \
            [TaskSegment("PAD", end, end + margin, NEUTRAL)]
    duration = clock[-1].end
    # effect sizes vary per participant so personalised models matter
    scaled = {k: v * params["effect_scale"][k] for k, v in config.effects.items()}
    cfg = replace(config, effects=scaled)

    def stream_len(rate):
        return int(round(duration * rate))

    stress_eda, _ = _stress_profile(clock, config.eda_rate, stream_len(config.eda_rate))
    eda = _generate_eda(rng, cfg, params, stress_eda, config.eda_rate)
    stress_ppg, _ = _stress_profile(clock, config.ppg_rate, stream_len(config.ppg_rate))
    ppg, beats = _generate_ppg(rng, cfg, params, clock, stress_ppg, config.ppg_rate)
    stress_acc, _ = _stress_profile(clock, config.accel_rate, stream_len(config.accel_rate))
    accel = replace(_generate_accel(rng, cfg, params, stress_acc, config.accel_rate), start_time=-margin)
    stress_aud, _ = _stress_profile(clock, config.audio_rate, stream_len(config.audio_rate))
    front, back = _generate_audio(rng, cfg, params, stress_aud, clock, config.audio_rate)

    params = dict(params, n_beats=int(len(beats)), timeline=asdict(timeline),
                  expected_counts=timeline.label_counts(), recording_margin=margin)
    return RawSession(
        participant_id, segments,
        TimeSeries("eda", -margin, config.eda_rate, eda),
        TimeSeries("ppg", -margin, config.ppg_rate, ppg),
        accel,
        TimeSeries("audio_front", -margin, config.audio_rate, front),
        TimeSeries("audio_back", -margin, config.audio_rate, back),
        params,
    )


def participant_ids(cohort_size: int) -> list:
    return [f"P{k + 1}" for k in range(cohort_size)]


def generate_cohort(config: GeneratorConfig):
    """Yield one RawSession per participant (lazily; sessions are large)."""
    for index, pid in enumerate(participant_ids(config.cohort_size)):
        yield generate_session(participant_timeline(config, index), config, pid)


def manifest(config: GeneratorConfig, sessions_params: dict) -> dict:
    return {
        "seed": config.seed,
        "separability": config.separability,
        "cohort_size": config.cohort_size,
        "counts": config.counts,
        "effects": config.effects,
        "recording_margin": config.recording_margin,
        "rates": {"eda": config.eda_rate, "ppg": config.ppg_rate,
                  "accel": config.accel_rate, "audio": config.audio_rate},
        "labels": {"stress": LABEL_NAMES[STRESS], "neutral": LABEL_NAMES[NEUTRAL]},
        "participants": sessions_params,
    }


def write_manifest(path, data: dict):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
