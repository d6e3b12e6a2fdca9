"""Griffin-Lim phase reconstruction and approximate mel inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .dsp import (
    AMP_FLOOR,
    DspConfig,
    MelSpectrogram,
    _mel_filterbank,
    amp_to_db,
    db_to_amp,
    deemphasize,
    denormalize_db,
    istft,
    normalize_db,
    stft,
)
from .errors import ShapeMismatch


@dataclass(frozen=True, eq=False)
class LinearSpectrogram:
    values: np.ndarray  # (T, fft_size//2 + 1), non-negative
    fft_size: int
    hop_size: int
    sample_rate: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.fft_size // 2 + 1:
            raise ShapeMismatch(f"linear spectrogram has shape {v.shape}, expected (T, {self.fft_size // 2 + 1})")
        if np.any(v < 0):
            raise ValueError("linear spectrogram magnitudes must be non-negative")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_clip(cls, clip: AudioClip, fft_size: int, hop_size: int) -> "LinearSpectrogram":
        return cls(np.abs(stft(clip.samples, fft_size, hop_size)), fft_size, hop_size, clip.sample_rate)


@dataclass
class GriffinLimResult:
    clip: AudioClip
    errors: list  # consistency error after each iteration


def consistency_error(signal, target, fft_size, hop_size) -> float:
    return float(np.linalg.norm(np.abs(stft(signal, fft_size, hop_size)) - target))


def griffin_lim_trace(mag: LinearSpectrogram, iterations: int = 60, power: float = 1.4) -> GriffinLimResult:
    """Griffin-Lim from zero phase, recording ``|| |STFT(x_k)| - target ||_F`` per iteration."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n, hop = mag.fft_size, mag.hop_size
    length = (mag.values.shape[0] - 1) * hop + n
    if not np.any(mag.values):
        return GriffinLimResult(AudioClip(np.zeros(length), mag.sample_rate), [])
    target = mag.values**power
    spec = target.astype(np.complex128)
    errors = []
    for _ in range(iterations):
        x = istft(spec, n, hop)
        rebuilt = stft(x, n, hop)
        magnitude = np.abs(rebuilt)
        errors.append(float(np.linalg.norm(magnitude - target)))
        phase = np.ones_like(rebuilt)
        nz = magnitude > 0
        phase[nz] = rebuilt[nz] / magnitude[nz]
        spec = target * phase
    return GriffinLimResult(AudioClip(x, mag.sample_rate), errors)


def griffin_lim(mag: LinearSpectrogram, iterations: int = 60, power: float = 1.4) -> AudioClip:
    return griffin_lim_trace(mag, iterations, power).clip


def linear_to_mel(linear: np.ndarray, cfg: DspConfig) -> MelSpectrogram:
    """Project a (T, n_bins) magnitude spectrogram to the normalised mel scale."""
    linear = np.asarray(linear, dtype=np.float64)
    if linear.ndim != 2 or linear.shape[1] != cfg.n_bins:
        raise ShapeMismatch(f"linear spectrogram has shape {linear.shape}, expected (T, {cfg.n_bins})")
    fb = _mel_filterbank(cfg.num_mels, cfg.fmin, cfg.fmax, cfg.fft_size, cfg.sample_rate)
    return MelSpectrogram(normalize_db(amp_to_db(linear @ fb.T), cfg))


def mel_to_linear(mel, cfg: DspConfig) -> LinearSpectrogram:
    """Pseudo-inverse of :func:`linear_to_mel`, floored at the amplitude floor.

    Mel bins sitting at the bottom of the normalised range carry no level
    information and are treated as silent before inversion.
    """
    values = np.asarray(mel.values if isinstance(mel, MelSpectrogram) else mel, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != cfg.num_mels:
        raise ShapeMismatch(f"mel has shape {values.shape}, expected (T, {cfg.num_mels})")
    amp = np.where(values > 0, db_to_amp(denormalize_db(values, cfg)), 0.0)
    fb = _mel_filterbank(cfg.num_mels, cfg.fmin, cfg.fmax, cfg.fft_size, cfg.sample_rate)
    linear = amp @ np.linalg.pinv(fb).T
    return LinearSpectrogram(np.maximum(linear, AMP_FLOOR), cfg.fft_size, cfg.hop_size, cfg.sample_rate)


def mel_to_audio(mel, cfg: DspConfig, iterations: int = 60, power: float = 1.4) -> AudioClip:
    """Mel inversion, Griffin-Lim, then de-emphasis to undo the feature preemphasis."""
    clip = griffin_lim(mel_to_linear(mel, cfg), iterations, power)
    samples = deemphasize(clip.samples, cfg.preemphasis)
    peak = np.max(np.abs(samples))
    if peak > 1.0:
        # sharpening changes the overall scale; bring it back into range
        samples = samples * (0.999 / peak)
    return AudioClip(samples, clip.sample_rate)
