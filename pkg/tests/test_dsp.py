import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from voiceclone.audio_io import AudioClip
from voiceclone.dsp import (
    DspConfig,
    deemphasize,
    frame_count,
    hann,
    hz_to_mel,
    mel_filterbank,
    melspectrogram,
    preemphasize,
    stft_magnitude,
    trim_silence,
)
from voiceclone.errors import DegenerateFilter, SampleRateMismatch, SignalTooShort

finite = st.floats(-1, 1, allow_nan=False)


def test_preemphasis_example():
    np.testing.assert_allclose(preemphasize([1, 1, 1], 0.97), [1.0, 0.03, 0.03], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 300), elements=finite))
def test_preemphasis_inverse_and_zero_coeff(x):
    assert np.max(np.abs(deemphasize(preemphasize(x, 0.97), 0.97) - x)) <= 1e-12
    np.testing.assert_array_equal(preemphasize(x, 0.0), x)


def test_trim_all_zeros_is_empty():
    assert len(trim_silence(AudioClip(np.zeros(10000), 22050), 60)) == 0


def test_trim_leaves_loud_clip_alone(rng):
    clip = AudioClip(rng.uniform(-0.5, 0.5, 9000), 22050)
    assert np.array_equal(trim_silence(clip, 60).samples, clip.samples)


def test_trim_removes_silent_edges(rng):
    body = rng.uniform(-0.5, 0.5, 8192)
    x = np.concatenate([np.zeros(6000), body, np.zeros(6000)])
    out = trim_silence(AudioClip(x, 22050), 60)
    assert len(out) < len(x)
    assert np.array_equal(out.samples[np.flatnonzero(out.samples)[0] :][: len(body)], body)


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 12000), elements=finite),
    st.integers(0, 8000),
    st.integers(0, 8000),
    st.floats(10, 90),
)
def test_trim_idempotent_and_never_longer(x, lead, tail, thr):
    clip = AudioClip(np.concatenate([np.zeros(lead), x, np.zeros(tail)]), 22050)
    once = trim_silence(clip, thr)
    assert len(once) <= len(clip)
    assert np.array_equal(trim_silence(once, thr).samples, once.samples)


def test_stft_rejects_short_signal():
    with pytest.raises(SignalTooShort):
        stft_magnitude(np.zeros(100), 1024, 256)


@pytest.mark.parametrize("k", [5, 40, 200])
def test_stft_bin_centred_sinusoid(k):
    n = 1024
    x = np.sin(2 * np.pi * k * np.arange(8000) / n)
    assert np.all(np.argmax(stft_magnitude(x, n, 256), axis=1) == k)


def test_stft_zero_signal():
    assert not np.any(stft_magnitude(np.zeros(4096), 1024, 256))


def test_stft_parseval(rng):
    n = 1024
    x = rng.normal(size=3000)
    mag = stft_magnitude(x, n, 256)
    frame = x[256 : 256 + n] * hann(n)
    # one-sided spectrum: interior bins appear twice in the full DFT
    full = mag[1, 0] ** 2 + mag[1, -1] ** 2 + 2 * np.sum(mag[1, 1:-1] ** 2)
    assert abs(full / n - np.sum(frame**2)) <= 1e-6 * np.sum(frame**2)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20000), st.sampled_from([256, 512, 1024]), st.sampled_from([64, 128, 256]))
def test_frame_count_formula(length, n, hop):
    if length < n:
        return
    assert stft_magnitude(np.zeros(length), n, hop).shape == (1 + (length - n) // hop, n // 2 + 1)
    assert frame_count(length, n, hop) == 1 + (length - n) // hop


def test_mel_filterbank_default_shape_and_support(dsp_cfg):
    fb = mel_filterbank(dsp_cfg)
    assert fb.shape == (80, 513)
    assert np.all(fb >= 0)
    assert np.all(fb.sum(axis=1) > 0)
    freqs = np.arange(513) * dsp_cfg.sample_rate / dsp_cfg.fft_size
    outside = (freqs < dsp_cfg.fmin) | (freqs > dsp_cfg.fmax)
    assert not np.any(fb[:, outside])


def test_mel_scale_formula():
    assert hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2))


def test_mel_filterbank_degenerate():
    with pytest.raises(DegenerateFilter):
        mel_filterbank(DspConfig(num_mels=80, fft_size=64, hop_size=16))


def test_config_invariants():
    with pytest.raises(ValueError):
        DspConfig(fmin=8000, fmax=7600)
    with pytest.raises(ValueError):
        DspConfig(hop_size=2048)
    with pytest.raises(ValueError):
        DspConfig(min_level_db=10)
    with pytest.raises(ValueError):
        DspConfig(vad_threshold_db=0)


def test_melspectrogram_silence_is_zero(dsp_cfg):
    mel = melspectrogram(AudioClip(np.zeros(4096), 22050), dsp_cfg)
    assert mel.values.shape == (13, 80)
    assert not np.any(mel.values)


def test_melspectrogram_noise_strictly_inside(dsp_cfg, rng):
    mel = melspectrogram(AudioClip(rng.uniform(-0.3, 0.3, 22050), 22050), dsp_cfg)
    assert np.all((mel.values > 0) & (mel.values < 1))
    assert mel.values.var() > 0


def test_normalization_upper_endpoint(dsp_cfg):
    from voiceclone.dsp import amp_to_db, normalize_db

    amp = 10 ** (dsp_cfg.ref_level_db / 20)
    assert normalize_db(amp_to_db(np.array([amp])), dsp_cfg)[0] == 1.0


def test_melspectrogram_rate_mismatch(dsp_cfg):
    with pytest.raises(SampleRateMismatch):
        melspectrogram(AudioClip(np.zeros(4096), 16000), dsp_cfg)


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, st.integers(1024, 6000), elements=finite))
def test_melspectrogram_always_unit_range(x):
    v = melspectrogram(AudioClip(x, 22050), DspConfig()).values
    assert v.min() >= 0 and v.max() <= 1
