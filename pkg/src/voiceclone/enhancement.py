"""Pre-encoding enhancement stage.

Two methods are available: an exact pass-through, and a spectral gate that
zeroes STFT bins not clearly above a noise floor estimated from the leading
frames. The gate analyses with a Hann window at 75% overlap, for which the
squared windows sum to a constant. The STFT is then a tight frame, and a
0/1 mask followed by least-squares resynthesis cannot add energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .dsp import DspConfig, istft, stft
from .errors import ConfigError, SignalTooShort

METHODS = ("passthrough", "spectral_gate")
CLI_NAMES = {"none": "passthrough", "gate": "spectral_gate"}


@dataclass(frozen=True)
class EnhancementMethod:
    selector: str = "passthrough"
    gate_threshold_db: float = 6.0
    noise_profile_frames: int = 8

    def __post_init__(self):
        if self.selector not in METHODS:
            raise ConfigError(f"unknown enhancement method {self.selector!r}")
        if self.noise_profile_frames < 1:
            raise ConfigError("noise_profile_frames must be >= 1")

    @classmethod
    def from_cli(cls, name: str, **kw) -> "EnhancementMethod":
        if name not in CLI_NAMES:
            raise ConfigError(f"--enhance must be one of {sorted(CLI_NAMES)}, got {name!r}")
        return cls(CLI_NAMES[name], **kw)


def gate_hop(fft_size: int) -> int:
    return max(1, fft_size // 4)


def enhance(clip: AudioClip, method: EnhancementMethod, dsp_cfg: DspConfig) -> AudioClip:
    if method.selector == "passthrough":
        return clip
    return spectral_gate(clip, dsp_cfg.fft_size, method.gate_threshold_db, method.noise_profile_frames)


def spectral_gate(clip: AudioClip, fft_size: int, threshold_db: float, profile_frames: int) -> AudioClip:
    hop = gate_hop(fft_size)
    n = len(clip)
    needed = fft_size + (profile_frames - 1) * hop
    if n < needed:
        raise SignalTooShort(f"{n} samples cannot supply {profile_frames} noise-profile frames ({needed} needed)")

    # noise profile from the unpadded leading frames
    power = np.abs(stft(clip.samples[:needed], fft_size, hop)) ** 2
    floor = power.mean(axis=0)
    cutoff = floor * 10.0 ** (threshold_db / 10.0)

    # pad so every original sample sits where the squared windows sum to a constant
    tail = fft_size + (-(n + fft_size) % hop)
    padded = np.concatenate([np.zeros(fft_size), clip.samples, np.zeros(tail)])
    spec = stft(padded, fft_size, hop)
    keep = np.abs(spec) ** 2 > cutoff
    out = istft(spec * keep, fft_size, hop)
    return AudioClip(out[fft_size : fft_size + n], clip.sample_rate)
