import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stressdetect.badge import (AccelStream, AudioFrame, BadgeConfig, extract_badge_features,
                                movement_features, posture_features, spectral_feature_matrix,
                                spectral_features, speech_activity, split_frames)
from stressdetect.data import BADGE_FEATURES, TimeSeries
from stressdetect.errors import AlignmentError, ConfigurationError

ACC_RATE = 50.0
AUDIO_RATE = 8000.0


def still(n, ax=0.0, ay=0.0, az=1.0):
    return AccelStream(ACC_RATE, np.full(n, ax), np.full(n, ay), np.full(n, az))


def tone(freqs, amps, n=800, rate=AUDIO_RATE, phase=0.3):
    t = np.arange(n) / rate
    return sum(a * np.sin(2 * np.pi * f * t + phase * (k + 1))
               for k, (f, a) in enumerate(zip(freqs, amps)))


def frames_of(matrix, rate=AUDIO_RATE, mic="front"):
    return [AudioFrame(mic, row, rate, k * 0.1) for k, row in enumerate(matrix)]


# --- movement --------------------------------------------------------------

def test_stationary_badge():
    out = movement_features(still(500))
    np.testing.assert_allclose(out["bm"].values, 1.0)
    assert np.all(out["bm_act"].values == 0) and np.all(out["bm_r"].values == 0)
    assert len(out["bm"]) == 100 and out["bm"].rate == 10.0


def test_energy_step():
    az = np.r_[np.ones(250), np.full(250, np.sqrt(2.0))]
    act = movement_features(AccelStream(ACC_RATE, np.zeros(500), np.zeros(500), az))["bm_act"].values
    assert act[50] == pytest.approx(10.0)
    assert np.count_nonzero(np.abs(act) > 1e-9) == 1


def test_energy_ramp_has_no_second_difference():
    t = np.arange(1000) / ACC_RATE
    az = np.sqrt(1.0 + 0.1 * t)
    out = movement_features(AccelStream(ACC_RATE, np.zeros(1000), np.zeros(1000), az))
    np.testing.assert_allclose(out["bm_r"].values[2:], 0.0, atol=1e-9)
    np.testing.assert_allclose(out["bm_act"].values[1:], 0.1, rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), perm=st.permutations([0, 1, 2]))
def test_bm_axis_permutation_invariant(seed, perm):
    axes = np.random.default_rng(seed).normal(size=(3, 200))
    a = movement_features(AccelStream(ACC_RATE, *axes))
    b = movement_features(AccelStream(ACC_RATE, *axes[list(perm)]))
    for key in ("bm", "bm_act", "bm_r"):
        np.testing.assert_allclose(a[key].values, b[key].values, rtol=1e-12, atol=1e-12)


def test_accel_rate_check():
    with pytest.raises(ConfigurationError):
        movement_features(AccelStream(5.0, np.zeros(10), np.zeros(10), np.ones(10)))
    with pytest.raises(ConfigurationError):
        AccelStream(50.0, np.zeros(10), np.zeros(9), np.ones(10))


# --- posture ---------------------------------------------------------------

def test_flat_badge_angles():
    out = posture_features(still(500))
    np.testing.assert_allclose(out["pos_lr"].values, 0.0, atol=1e-12)
    np.testing.assert_allclose(out["pos_fb"].values, 0.0, atol=1e-12)


def test_tilt_thirty_degrees():
    a = np.radians(30.0)
    out = posture_features(still(500, ax=np.sin(a), az=np.cos(a)))
    np.testing.assert_allclose(out["pos_lr"].values, 30.0, atol=0.5)
    np.testing.assert_allclose(out["pos_fb"].values, 0.0, atol=1e-9)
    a = np.radians(20.0)
    out = posture_features(still(500, ay=np.sin(a), az=np.cos(a)))
    np.testing.assert_allclose(out["pos_fb"].values, 20.0, atol=0.5)


def test_shaking_does_not_wrap_angles():
    # brief bursts that flip the sign of az must not leave a 360 degree offset behind
    rng = np.random.default_rng(0)
    n = int(60 * ACC_RATE)
    burst = np.zeros(n)
    for start in range(200, n, 500):
        burst[start:start + 5] = 1.0
    ax, ay = 0.05 * rng.standard_normal(n), 1.2 * burst * rng.standard_normal(n)
    az = 1.0 - 1.8 * burst
    out = posture_features(AccelStream(ACC_RATE, ax, ay, az))
    quiet = out["pos_fb"].values[100:-100]
    assert np.median(np.abs(quiet)) < 2.0 and np.abs(quiet).max() < 180.0


def test_constant_rotation():
    t = np.arange(int(8 * ACC_RATE)) / ACC_RATE
    theta = np.radians(10.0 * t)
    out = posture_features(AccelStream(ACC_RATE, np.sin(theta), np.zeros_like(t), np.cos(theta)))
    act, acc = out["pos_act"].values, out["pos_r"].values
    np.testing.assert_allclose(act[5:-5], 10.0, atol=0.5)
    np.testing.assert_allclose(acc[5:-5], 0.0, atol=1.0)
    assert act[0] == 0.0 and acc[0] == acc[1] == 0.0


# --- speech ----------------------------------------------------------------

def test_silence():
    zeros = np.zeros((30, 800))
    out = speech_activity(frames_of(zeros), frames_of(zeros, mic="back"))
    assert np.all(out["vol_f"].values == 0) and np.all(out["voiced"].values == 0)
    assert np.all(out["unvoiced"].values == 1)


def test_square_wave_volume():
    frame = np.where(np.arange(800) % 20 < 10, 0.5, -0.5)
    out = speech_activity(frames_of([frame]), frames_of([frame]))
    assert out["vol_f"].values[0] == pytest.approx(0.5)


def test_alternating_volume_change():
    rows = [np.full(800, 0.4) if k % 2 else np.zeros(800) for k in range(20)]
    out = speech_activity(frames_of(rows), frames_of(rows))
    np.testing.assert_allclose(out["volc_f"].values[1:], 0.4)
    assert out["volc_f"].values[0] == 0.0


def test_voicing_follows_noise_floor(rng):
    quiet = 0.01 * rng.normal(size=(60, 800))
    loud = quiet.copy()
    loud[40:50] += tone([180.0], [0.5])
    out = speech_activity(frames_of(loud), frames_of(quiet))
    voiced = out["voiced"].values
    assert voiced[40:50].all() and not voiced[:40].any()


def test_frame_grid_mismatch():
    a = frames_of(np.zeros((5, 800)))
    b = [AudioFrame("back", np.zeros(800), AUDIO_RATE, k * 0.1 + 0.05) for k in range(5)]
    with pytest.raises(AlignmentError):
        speech_activity(a, b)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), gain=st.floats(0.0, 3.0))
def test_voiced_unvoiced_partition(seed, gain):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(80, 800)) * np.r_[np.full(40, 0.01), np.full(40, gain)][:, None]
    out = speech_activity(frames_of(x), frames_of(x))
    v, u = out["voiced"].values, out["unvoiced"].values
    assert set(np.unique(v)) <= {0.0, 1.0}
    np.testing.assert_array_equal(v + u, 1.0)


# --- spectrum and pitch ----------------------------------------------------

def test_pure_tone():
    feats = spectral_features(AudioFrame("front", tone([200.0], [1.0]), AUDIO_RATE, 0.0))
    assert feats["hz0"] == pytest.approx(200.0, abs=10.0)
    # bin-centred sine: Hann-normalised peak equals the amplitude
    assert feats["amp0"] == pytest.approx(1.0, rel=1e-6)
    assert feats["pitch"] == pytest.approx(200.0, abs=2.0)


def test_zero_frame():
    feats = spectral_features(AudioFrame("front", np.zeros(800), AUDIO_RATE, 0.0))
    assert all(v == 0.0 for v in feats.values())


def test_two_tones():
    feats = spectral_features(AudioFrame("front", tone([200.0, 400.0], [1.0, 0.5]), AUDIO_RATE, 0.0))
    assert feats["hz0"] == pytest.approx(200.0) and feats["hz1"] == pytest.approx(400.0)
    assert feats["amp0"] > feats["amp1"]
    # the 200 Hz window sidelobes leak a few ppm into the 400 Hz bin
    assert feats["amp1"] == pytest.approx(0.5, rel=1e-4)


def test_short_frame_rejected():
    with pytest.raises(ConfigurationError):
        spectral_features(AudioFrame("front", np.zeros(32), AUDIO_RATE, 0.0))


@settings(max_examples=40, deadline=None)
@given(f0=st.floats(60.0, 380.0), h2=st.floats(0.0, 0.8), seed=st.integers(0, 1000))
def test_pitch_recovers_fundamental(f0, h2, seed):
    noise = 0.01 * np.random.default_rng(seed).normal(size=800)
    frame = tone([f0, 2 * f0], [1.0, h2]) + noise
    _, _, pitch = spectral_feature_matrix(frame[None, :], AUDIO_RATE)
    assert pitch[0] == pytest.approx(f0, rel=0.02)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), k=st.floats(0.01, 100.0), kind=st.sampled_from(["noise", "harm"]))
def test_spectral_properties(seed, k, kind):
    rng = np.random.default_rng(seed)
    if kind == "noise":
        frame = rng.normal(size=800)
    else:
        f0 = rng.uniform(40, 500)
        frame = tone([f0, 2 * f0, 3 * f0], rng.uniform(0.1, 1, 3)) + 0.05 * rng.normal(size=800)
    hz, amp, pitch = spectral_feature_matrix(np.stack([frame, k * frame]), AUDIO_RATE)
    assert np.all(np.diff(amp, axis=1) <= 0)
    assert np.all(hz >= 0) and np.all(amp >= 0)
    for p in pitch:
        assert p == 0.0 or 50.0 <= p <= 400.0
    np.testing.assert_allclose(amp[1], k * amp[0], rtol=1e-6)
    np.testing.assert_array_equal(hz[1], hz[0])
    assert pitch[1] == pytest.approx(pitch[0], rel=1e-9, abs=1e-9)
    vol = np.abs(np.stack([frame, k * frame])).mean(axis=1)
    out = speech_activity((frame[None], np.zeros(1), AUDIO_RATE), (k * frame[None], np.zeros(1), AUDIO_RATE))
    assert out["vol_b"].values[0] == pytest.approx(vol[1], rel=1e-12)


# --- full extraction -------------------------------------------------------

def test_extract_badge_features_layout(rng):
    seconds = 12
    n_acc = int(seconds * ACC_RATE)
    accel = AccelStream(ACC_RATE, 0.05 * rng.normal(size=n_acc), 0.05 * rng.normal(size=n_acc),
                        1 + 0.05 * rng.normal(size=n_acc))
    audio = tone([150.0], [0.3], n=int(seconds * 4000), rate=4000.0) + 0.01 * rng.normal(size=seconds * 4000)
    front = TimeSeries("audio_front", 0.0, 4000.0, audio)
    back = TimeSeries("audio_back", 0.0, 4000.0, 0.25 * audio)
    out = extract_badge_features(accel, front, back)
    assert set(out) == set(BADGE_FEATURES)
    lengths = {len(ts) for ts in out.values()}
    assert lengths == {seconds * 10}
    assert np.all(out["voiced"].values + out["unvoiced"].values == 1)
    # pitch is only reported on voiced ticks
    assert np.all(out["pitch_f"].values[out["voiced"].values == 0] == 0)


def test_frame_duration_must_match_tick():
    accel = still(100)
    audio = TimeSeries("a", 0.0, 4000.0, np.zeros(8000))
    with pytest.raises(ConfigurationError):
        extract_badge_features(accel, audio, audio, config=BadgeConfig(frame_duration=0.05))


def test_split_frames():
    frames, starts, rate = split_frames(np.arange(2050.0), 1000.0, 1.0)
    assert frames.shape == (20, 100) and rate == 1000.0
    np.testing.assert_allclose(starts[:3], [1.0, 1.1, 1.2])
