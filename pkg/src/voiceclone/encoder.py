"""Speaker encoder: spectral processing unit, temporal and cross-sample aggregation.

Variant ``t1`` averages frames over time; variant ``t2`` pools them with
multi-head self-attention. Both then pool the per-sample vectors across
cloning samples with attention and project the result to ``d_embedding``.
Because the attention weights sum to one, projecting each sample first and
then taking the weighted sum equals projecting the pooled vector, which is
how the forward pass evaluates it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .attention import (
    AttentionConfig,
    AttentionParams,
    _backward,
    _forward,
    elu,
    elu_grad,
)
from .audio_io import AudioClip
from .dsp import DspConfig, MelSpectrogram, melspectrogram, trim_silence
from .errors import (
    ConfigError,
    EmptyInput,
    SampleRateMismatch,
    SampleTooShort,
    ShapeMismatch,
    TooManySamples,
)

VARIANTS = ("t1", "t2")


@dataclass(frozen=True)
class EncoderConfig:
    d_mel: int = 80
    f_mapped: int = 30
    d_attn: int = 16
    num_heads: int = 8
    d_embedding: int = 256
    max_cloning_samples: int = 6
    variant: str = "t2"
    temporal_attention: AttentionConfig = field(init=False)
    cross_sample_attention: AttentionConfig = field(init=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if min(self.d_mel, self.f_mapped, self.d_embedding, self.max_cloning_samples) < 1:
            raise ConfigError("encoder dimensions must all be >= 1")
        attn = AttentionConfig(self.f_mapped, self.d_attn, self.num_heads)
        object.__setattr__(self, "temporal_attention", attn)
        object.__setattr__(self, "cross_sample_attention", attn)

    def with_variant(self, variant: str) -> "EncoderConfig":
        d = self.to_dict()
        d["variant"] = variant
        return EncoderConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("temporal_attention")
        d.pop("cross_sample_attention")
        return d


@dataclass
class EncoderParams:
    w_spec: np.ndarray  # (d_mel, f_mapped)
    temporal: AttentionParams
    cross: AttentionParams
    w_s: np.ndarray  # (f_mapped, d_embedding)

    @classmethod
    def init(cls, cfg: EncoderConfig, seed: int = 0) -> "EncoderParams":
        rng = np.random.default_rng(seed)
        b_spec = 1.0 / math.sqrt(cfg.d_mel)
        b_s = 1.0 / math.sqrt(cfg.f_mapped)
        return cls(
            w_spec=rng.uniform(-b_spec, b_spec, size=(cfg.d_mel, cfg.f_mapped)),
            temporal=AttentionParams.init(cfg.temporal_attention, rng),
            cross=AttentionParams.init(cfg.cross_sample_attention, rng),
            w_s=rng.uniform(-b_s, b_s, size=(cfg.f_mapped, cfg.d_embedding)),
        )

    @classmethod
    def zeros_like(cls, other: "EncoderParams") -> "EncoderParams":
        return cls.from_flat({k: np.zeros_like(v) for k, v in other.flat().items()})

    def flat(self) -> dict[str, np.ndarray]:
        """Parameter groups keyed by dotted name; arrays are shared, not copied."""
        out = {"w_spec": self.w_spec}
        out.update({f"temporal.{k}": v for k, v in self.temporal.items()})
        out.update({f"cross.{k}": v for k, v in self.cross.items()})
        out["w_s"] = self.w_s
        return out

    @classmethod
    def from_flat(cls, flat: dict) -> "EncoderParams":
        def sub(prefix):
            return AttentionParams(
                **{k: np.asarray(flat[f"{prefix}.{k}"], dtype=np.float64) for k in AttentionParams.field_names()}
            )

        return cls(
            w_spec=np.asarray(flat["w_spec"], dtype=np.float64),
            temporal=sub("temporal"),
            cross=sub("cross"),
            w_s=np.asarray(flat["w_s"], dtype=np.float64),
        )

    def copy(self) -> "EncoderParams":
        return EncoderParams.from_flat({k: v.copy() for k, v in self.flat().items()})

    def check(self, cfg: EncoderConfig) -> None:
        if self.w_spec.shape != (cfg.d_mel, cfg.f_mapped):
            raise ShapeMismatch(f"w_spec has shape {self.w_spec.shape}, expected {(cfg.d_mel, cfg.f_mapped)}")
        if self.w_s.shape != (cfg.f_mapped, cfg.d_embedding):
            raise ShapeMismatch(f"w_s has shape {self.w_s.shape}, expected {(cfg.f_mapped, cfg.d_embedding)}")
        self.temporal.check(cfg.temporal_attention)
        self.cross.check(cfg.cross_sample_attention)

    def save(self, path) -> None:
        np.savez(path, **self.flat())

    @classmethod
    def load(cls, path) -> "EncoderParams":
        with np.load(path) as data:
            return cls.from_flat({k: data[k] for k in data.files})


def _mel_values(mel) -> np.ndarray:
    values = mel.values if isinstance(mel, MelSpectrogram) else mel
    return np.asarray(values, dtype=np.float64)


def spectral_process(mel, params: EncoderParams, cfg: EncoderConfig) -> np.ndarray:
    """Per-frame ``ELU(mel @ w_spec)``, shape (T, f_mapped)."""
    m = _mel_values(mel)
    if m.ndim != 2 or m.shape[1] != cfg.d_mel:
        raise ShapeMismatch(f"mel has shape {m.shape}, expected (T, {cfg.d_mel})")
    if m.shape[0] == 0:
        raise EmptyInput("mel spectrogram has no frames")
    return elu(m @ params.w_spec)


def temporal_aggregate(y, params: EncoderParams, cfg: EncoderConfig) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] == 0:
        raise EmptyInput("temporal aggregation needs at least one frame")
    if cfg.variant == "t1":
        return y.mean(axis=0)
    return _forward(y, params.temporal, cfg.temporal_attention).weights @ y


def cross_sample_weights(e, params: EncoderParams, cfg: EncoderConfig) -> np.ndarray:
    return _forward(_stack_check(e, cfg), params.cross, cfg.cross_sample_attention).weights


def cross_sample_aggregate(e, params: EncoderParams, cfg: EncoderConfig) -> np.ndarray:
    """Attention-weighted sum of the projected per-sample vectors ``e @ w_s``."""
    e = _stack_check(e, cfg)
    a = _forward(e, params.cross, cfg.cross_sample_attention).weights
    return (a @ e) @ params.w_s


def _stack_check(e, cfg: EncoderConfig) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] == 0:
        raise EmptyInput("cross-sample aggregation needs at least one sample")
    if e.shape[0] > cfg.max_cloning_samples:
        raise TooManySamples(f"{e.shape[0]} samples exceeds the limit of {cfg.max_cloning_samples}")
    if e.shape[1] != cfg.f_mapped:
        raise ShapeMismatch(f"sample embeddings have width {e.shape[1]}, expected {cfg.f_mapped}")
    return e


def encode_features(mels, params: EncoderParams, cfg: EncoderConfig) -> np.ndarray:
    """Speaker embedding from already-computed mel spectrograms."""
    if len(mels) == 0:
        raise EmptyInput("no cloning samples")
    if len(mels) > cfg.max_cloning_samples:
        raise TooManySamples(f"{len(mels)} samples exceeds the limit of {cfg.max_cloning_samples}")
    e = np.stack([temporal_aggregate(spectral_process(m, params, cfg), params, cfg) for m in mels])
    return cross_sample_aggregate(e, params, cfg)


def clip_features(clips, dsp_cfg: DspConfig, names=None) -> list[MelSpectrogram]:
    """Trim and featurize each clip, naming the offender on failure."""
    mels = []
    for i, clip in enumerate(clips):
        source = names[i] if names is not None else None
        if clip.sample_rate != dsp_cfg.sample_rate:
            raise SampleRateMismatch(
                f"sample {i}{f' ({source})' if source else ''} is {clip.sample_rate} Hz, "
                f"config expects {dsp_cfg.sample_rate} Hz"
            )
        trimmed = trim_silence(clip, dsp_cfg.vad_threshold_db)
        if len(trimmed) < dsp_cfg.fft_size:
            raise SampleTooShort(i, len(trimmed), dsp_cfg.fft_size, source)
        mels.append(melspectrogram(trimmed, dsp_cfg))
    return mels


def encode_speaker(
    samples: list[AudioClip],
    dsp_cfg: DspConfig,
    enc_cfg: EncoderConfig,
    params: EncoderParams,
    variant: str | None = None,
    names=None,
) -> np.ndarray:
    """Full pipeline: trim, mel, spectral unit, temporal then cross-sample pooling."""
    if variant is not None and variant != enc_cfg.variant:
        enc_cfg = enc_cfg.with_variant(variant)
    if len(samples) == 0:
        raise EmptyInput("no cloning samples")
    if len(samples) > enc_cfg.max_cloning_samples:
        raise TooManySamples(f"{len(samples)} samples exceeds the limit of {enc_cfg.max_cloning_samples}")
    if dsp_cfg.num_mels != enc_cfg.d_mel:
        raise ShapeMismatch(f"dsp produces {dsp_cfg.num_mels} mels, encoder expects {enc_cfg.d_mel}")
    return encode_features(clip_features(samples, dsp_cfg, names), params, enc_cfg)


def encoder_backward(mels, params: EncoderParams, cfg: EncoderConfig, upstream_grad) -> EncoderParams:
    """Gradients of ``upstream_grad . encode_features(mels)`` for every parameter."""
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != (cfg.d_embedding,):
        raise ShapeMismatch(f"upstream_grad has shape {g.shape}, expected ({cfg.d_embedding},)")
    if len(mels) == 0:
        raise EmptyInput("no cloning samples")

    per_sample = []
    for m in mels:
        values = _mel_values(m)
        pre = values @ params.w_spec
        y = elu(pre)
        if cfg.variant == "t2":
            cache = _forward(y, params.temporal, cfg.temporal_attention)
            e = cache.weights @ y
        else:
            cache = None
            e = y.mean(axis=0)
        per_sample.append((values, pre, y, cache, e))
    e = _stack_check(np.stack([s[4] for s in per_sample]), cfg)
    cross_cache = _forward(e, params.cross, cfg.cross_sample_attention)
    pooled = cross_cache.weights @ e

    grads = EncoderParams.zeros_like(params)
    grads.w_s[...] = np.outer(pooled, g)
    d_e, grads.cross = _backward(cross_cache, params.cross, cfg.cross_sample_attention, params.w_s @ g)

    for j, (values, pre, y, cache, _) in enumerate(per_sample):
        if cache is None:
            d_y = np.broadcast_to(d_e[j] / y.shape[0], y.shape)
        else:
            d_y, d_temporal = _backward(cache, params.temporal, cfg.temporal_attention, d_e[j])
            for name, arr in d_temporal.items():
                getattr(grads.temporal, name)[...] += arr
        grads.w_spec += values.T @ (d_y * elu_grad(pre))
    return grads
