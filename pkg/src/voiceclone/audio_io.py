"""RIFF/WAVE ingest and egress for mono clips.

Only two sample encodings are understood: 16-bit integer PCM (format code 1)
and 32-bit IEEE float (format code 3). WAVE_FORMAT_EXTENSIBLE headers are
accepted when their sub-format resolves to one of those two.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptHeader, EmptyClip, UnsupportedFormat

PCM = 1
IEEE_FLOAT = 3
EXTENSIBLE = 0xFFFE

PCM16_SCALE = 32768.0


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip holds mono samples only")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _read_chunks(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader("not a RIFF/WAVE container")
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise CorruptHeader(f"chunk {cid!r} truncated: {len(body)} of {size} bytes")
        yield cid, body
        pos += 8 + size + (size & 1)


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise CorruptHeader("fmt chunk shorter than 16 bytes")
    code, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body)
    if code == EXTENSIBLE:
        if len(body) < 40:
            raise CorruptHeader("extensible fmt chunk shorter than 40 bytes")
        (code,) = struct.unpack_from("<H", body, 24)
    if channels < 1 or rate < 1:
        raise CorruptHeader(f"invalid channel count {channels} or rate {rate}")
    if code == PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif code == IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedFormat(f"format code {code} with {bits} bits per sample")
    if block_align != channels * dtype.itemsize:
        raise CorruptHeader(f"block_align {block_align} inconsistent with {channels}x{bits} bit")
    return code, channels, rate, dtype


def load_wav(path) -> AudioClip:
    """Read a WAV file, average its channels to mono and clip to [-1, 1]."""
    return decode_wav(Path(path).read_bytes())


def decode_wav(data: bytes) -> AudioClip:
    fmt = None
    frames = None
    for cid, body in _read_chunks(data):
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            frames = body
    if fmt is None:
        raise CorruptHeader("missing fmt chunk")
    if frames is None:
        raise CorruptHeader("missing data chunk")
    code, channels, rate, dtype = fmt
    usable = len(frames) - len(frames) % (channels * dtype.itemsize)
    raw = np.frombuffer(frames[:usable], dtype=dtype).reshape(-1, channels)
    if code == PCM:
        samples = raw.astype(np.float64) / PCM16_SCALE
    else:
        samples = raw.astype(np.float64)
    mono = samples.mean(axis=1) if channels > 1 else samples[:, 0]
    return AudioClip(np.clip(mono, -1.0, 1.0), rate)


def save_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as mono 16-bit PCM."""
    payload = encode_wav(clip)
    with open(os.fspath(path), "wb") as fh:
        fh.write(payload)


def encode_wav(clip: AudioClip) -> bytes:
    if len(clip) == 0:
        raise EmptyClip("refusing to write an empty clip")
    pcm = np.clip(np.round(clip.samples * PCM16_SCALE), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, PCM, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16)
    data = b"data" + struct.pack("<I", len(payload)) + payload
    return header + fmt + data


def resample(clip: AudioClip, target_sr: int) -> AudioClip:
    """Linear-interpolation resampling to ``target_sr``."""
    if target_sr <= 0:
        raise ValueError(f"target_sr must be positive, got {target_sr}")
    if target_sr == clip.sample_rate:
        return clip
    n_in = len(clip)
    n_out = int(np.floor(n_in * target_sr / clip.sample_rate + 0.5))
    if n_in == 0 or n_out == 0:
        return AudioClip(np.zeros(0), target_sr)
    positions = np.arange(n_out) * (clip.sample_rate / target_sr)
    out = np.interp(positions, np.arange(n_in), clip.samples)
    return AudioClip(out, target_sr)
