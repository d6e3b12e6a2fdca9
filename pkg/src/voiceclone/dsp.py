"""Feature pipeline: preemphasis, energy VAD, STFT, mel filterbank, dB normalisation."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import get_window, lfilter

from .audio_io import AudioClip
from .errors import ConfigError, DegenerateFilter, SampleRateMismatch, SignalTooShort

VAD_FRAME = 2048
VAD_HOP = 512
AMP_FLOOR = 1e-5


@dataclass(frozen=True)
class DspConfig:
    num_mels: int = 80
    fmin: float = 125.0
    fmax: float = 7600.0
    fft_size: int = 1024
    hop_size: int = 256
    sample_rate: int = 22050
    preemphasis: float = 0.97
    min_level_db: float = -100.0
    ref_level_db: float = 20.0
    vad_threshold_db: float = 60.0

    def __post_init__(self):
        if self.num_mels < 1 or self.fft_size < 1 or self.hop_size < 1 or self.sample_rate < 1:
            raise ConfigError("num_mels, fft_size, hop_size and sample_rate must be positive")
        if not (self.fmin < self.fmax <= self.sample_rate / 2):
            raise ConfigError(
                f"need fmin < fmax <= sample_rate/2, got {self.fmin}, {self.fmax}, {self.sample_rate}"
            )
        if self.hop_size > self.fft_size:
            raise ConfigError("hop_size must not exceed fft_size")
        if self.min_level_db >= 0:
            raise ConfigError("min_level_db must be negative")
        if self.vad_threshold_db <= 0:
            raise ConfigError("vad_threshold_db must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    values: np.ndarray  # (T, num_mels), entries in [0, 1]

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def num_mels(self) -> int:
        return self.values.shape[1]


def preemphasize(signal, coeff: float) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    y = x.copy()
    y[1:] -= coeff * x[:-1]
    return y


def deemphasize(signal, coeff: float) -> np.ndarray:
    return lfilter([1.0], [1.0, -coeff], np.asarray(signal, dtype=np.float64))


def frame_energy_db(samples: np.ndarray, frame: int = VAD_FRAME, hop: int = VAD_HOP) -> np.ndarray:
    """20*log10(RMS) per frame; partial tail frames are zero-padded to full length."""
    n = len(samples)
    if n == 0:
        return np.zeros(0)
    count = 1 + max(0, -(-(n - frame) // hop))
    padded = np.zeros((count - 1) * hop + frame)
    padded[:n] = samples
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame)[::hop]
    rms = np.sqrt(np.mean(frames**2, axis=1))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(rms)


def trim_silence(clip: AudioClip, threshold_db: float = 60.0) -> AudioClip:
    """Drop leading/trailing frames more than ``threshold_db`` below the loudest frame."""
    energy = frame_energy_db(clip.samples)
    if energy.size == 0 or not np.isfinite(energy.max()):
        return AudioClip(np.zeros(0), clip.sample_rate)
    active = np.flatnonzero(energy >= energy.max() - threshold_db)
    start = active[0] * VAD_HOP
    end = min(len(clip), active[-1] * VAD_HOP + VAD_FRAME)
    return AudioClip(clip.samples[start:end], clip.sample_rate)


@lru_cache(maxsize=16)
def hann(n: int) -> np.ndarray:
    w = get_window("hann", n, fftbins=True)
    w.flags.writeable = False
    return w


def frame_count(length: int, fft_size: int, hop_size: int) -> int:
    if length < fft_size:
        return 0
    return 1 + (length - fft_size) // hop_size


def stft(signal, fft_size: int, hop_size: int) -> np.ndarray:
    """Complex Hann-windowed STFT, shape (T, fft_size//2 + 1). Partial tail frame dropped."""
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < fft_size:
        raise SignalTooShort(f"signal of {len(x)} samples is shorter than fft_size {fft_size}")
    frames = np.lib.stride_tricks.sliding_window_view(x, fft_size)[::hop_size]
    return np.fft.rfft(frames * hann(fft_size), axis=1)


def stft_magnitude(signal, fft_size: int, hop_size: int) -> np.ndarray:
    return np.abs(stft(signal, fft_size, hop_size))


def istft(spec: np.ndarray, fft_size: int, hop_size: int) -> np.ndarray:
    """Least-squares inverse of :func:`stft`; output length (T-1)*hop + fft_size."""
    count = spec.shape[0]
    length = (count - 1) * hop_size + fft_size
    w = hann(fft_size)
    frames = np.fft.irfft(spec, n=fft_size, axis=1) * w
    out = np.zeros(length)
    norm = np.zeros(length)
    for t in range(count):
        sl = slice(t * hop_size, t * hop_size + fft_size)
        out[sl] += frames[t]
        norm[sl] += w * w
    nonzero = norm > 1e-10
    out[nonzero] /= norm[nonzero]
    out[~nonzero] = 0.0
    return out


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: DspConfig) -> np.ndarray:
    return _mel_filterbank(cfg.num_mels, cfg.fmin, cfg.fmax, cfg.fft_size, cfg.sample_rate).copy()


@lru_cache(maxsize=16)
def _mel_filterbank(num_mels, fmin, fmax, fft_size, sample_rate):
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lower = (freqs[None, :] - edges[:-2, None]) / (edges[1:-1] - edges[:-2])[:, None]
    upper = (edges[2:, None] - freqs[None, :]) / (edges[2:] - edges[1:-1])[:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    # area normalisation, as in the Slaney auditory toolbox
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if empty.size:
        raise DegenerateFilter(
            f"mel filters {empty.tolist()} cover no FFT bin; raise fft_size or lower num_mels"
        )
    weights.flags.writeable = False
    return weights


def amp_to_db(x):
    return 20.0 * np.log10(np.maximum(AMP_FLOOR, x))


def db_to_amp(x):
    return 10.0 ** (np.asarray(x) / 20.0)


def normalize_db(db, cfg: DspConfig):
    return np.clip((db - cfg.ref_level_db - cfg.min_level_db) / -cfg.min_level_db, 0.0, 1.0)


def denormalize_db(norm, cfg: DspConfig):
    return np.clip(norm, 0.0, 1.0) * -cfg.min_level_db + cfg.min_level_db + cfg.ref_level_db


def melspectrogram(clip: AudioClip, cfg: DspConfig) -> MelSpectrogram:
    if clip.sample_rate != cfg.sample_rate:
        raise SampleRateMismatch(f"clip is {clip.sample_rate} Hz, config expects {cfg.sample_rate} Hz")
    emphasized = preemphasize(clip.samples, cfg.preemphasis)
    mag = stft_magnitude(emphasized, cfg.fft_size, cfg.hop_size)
    mel = mag @ mel_filterbank(cfg).T
    return MelSpectrogram(normalize_db(amp_to_db(mel), cfg))
