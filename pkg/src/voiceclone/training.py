"""Toy-scale encoder training and finite-difference gradient verification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .audio_io import AudioClip
from .dsp import DspConfig, melspectrogram
from .encoder import EncoderConfig, EncoderParams, encode_features, encoder_backward
from .errors import ConfigError, DatasetTooSmall, LabelOutOfRange, ShapeMismatch

# ---------------------------------------------------------------------------
# objective


def classifier_loss(embedding, label: int, head):
    """Softmax cross-entropy of ``embedding @ head``.

    Returns ``(loss, grad_embedding, grad_head)``.
    """
    e = np.asarray(embedding, dtype=np.float64)
    w = np.asarray(head, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != e.shape[0]:
        raise ShapeMismatch(f"head has shape {w.shape}, expected ({e.shape[0]}, S)")
    n_classes = w.shape[1]
    if not 0 <= label < n_classes:
        raise LabelOutOfRange(f"label {label} outside [0, {n_classes})")
    logits = e @ w
    shifted = logits - logits.max()
    log_z = math.log(np.exp(shifted).sum())
    loss = log_z - shifted[label]
    d_logits = np.exp(shifted - log_z)
    d_logits[label] -= 1.0
    return float(loss), w @ d_logits, np.outer(e, d_logits)


# ---------------------------------------------------------------------------
# optimiser


@dataclass
class OptimizerState:
    learning_rate: float = 5e-4
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-6
    noam_warmup: int | None = None
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def from_hparams(cls, settings: dict, noam: bool = False, warmup: int = 4000) -> "OptimizerState":
        kw = {k: float(settings[k]) for k in ("learning_rate", "beta1", "beta2", "eps") if k in settings}
        return cls(noam_warmup=warmup if noam else None, **kw)


def noam_factor(step: int, warmup: int) -> float:
    step = max(step, 1)
    return warmup**0.5 * min(step * warmup**-1.5, step**-0.5)


def adam_step(params: dict, grads: dict, state: OptimizerState) -> dict:
    """Bias-corrected Adam over a dict of arrays. Returns the new parameter dict."""
    if set(params) != set(grads):
        raise ShapeMismatch("parameter and gradient groups differ")
    state.step += 1
    lr = state.learning_rate
    if state.noam_warmup:
        lr *= noam_factor(state.step, state.noam_warmup)
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    out = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != np.shape(p):
            raise ShapeMismatch(f"{name}: gradient shape {g.shape} != parameter shape {np.shape(p)}")
        m = state.m.get(name, np.zeros_like(g))
        v = state.v.get(name, np.zeros_like(g))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        out[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out


# ---------------------------------------------------------------------------
# synthetic corpus


@dataclass
class Speaker:
    speaker_id: str
    clips: list


@dataclass
class ToyDataset:
    speakers: list

    def validate(self, min_clips: int) -> None:
        if len(self.speakers) < 2:
            raise DatasetTooSmall(f"need at least 2 speakers, got {len(self.speakers)}")
        for s in self.speakers:
            if len(s.clips) < min_clips:
                raise DatasetTooSmall(f"speaker {s.speaker_id} has {len(s.clips)} clips, need {min_clips}")


def _resonator(freq, bandwidth, sr):
    r = math.exp(-math.pi * bandwidth / sr)
    theta = 2 * math.pi * freq / sr
    return [1.0 - r], [1.0, -2 * r * math.cos(theta), r * r]


def synth_voice(rng, f0, formants, sr, duration, breathiness=0.05) -> np.ndarray:
    """Harmonic source with slight vibrato, formant resonators, plus filtered noise."""
    n = int(round(duration * sr))
    t = np.arange(n) / sr
    vibrato = 1.0 + 0.01 * np.sin(2 * np.pi * rng.uniform(4.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / sr
    n_harm = int(min(40, (sr / 2 - 200) // f0))
    source = sum(np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k for k in range(1, n_harm + 1))
    source = source + breathiness * rng.normal(size=n)
    out = np.zeros(n)
    for freq, bw in formants:
        b, a = _resonator(freq, bw, sr)
        out += lfilter(b, a, source)
    return 0.5 * out / np.max(np.abs(out))


def synthetic_speakers(n_speakers=8, clips_per_speaker=6, seed=0, sr=22050, duration=0.6) -> ToyDataset:
    """Voices separated by fundamental frequency and formant placement."""
    rng = np.random.default_rng(seed)
    f0s = np.geomspace(90.0, 300.0, n_speakers)
    rng.shuffle(f0s)
    speakers = []
    for s in range(n_speakers):
        formants = [
            (rng.uniform(300, 900), 80.0),
            (rng.uniform(1000, 2400), 120.0),
            (rng.uniform(2500, 3800), 160.0),
        ]
        clips = []
        for _ in range(clips_per_speaker):
            f0 = f0s[s] * rng.uniform(0.95, 1.05)
            jittered = [(f * rng.uniform(0.97, 1.03), bw) for f, bw in formants]
            clips.append(AudioClip(synth_voice(rng, f0, jittered, sr, duration), sr))
        speakers.append(Speaker(f"spk{s:02d}", clips))
    return ToyDataset(speakers)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    intra_cos: float
    inter_cos: float

    def to_json(self) -> str:
        return json.dumps(
            {"epoch": self.epoch, "loss": self.loss, "intra_cos": self.intra_cos, "inter_cos": self.inter_cos}
        )

    @property
    def margin(self) -> float:
        return self.intra_cos - self.inter_cos


def _cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def separation(enrolled, probes):
    """Mean cosine of each probe to its own speaker and to every other speaker."""
    n = len(enrolled)
    sims = np.array([[_cos(p, e) for e in enrolled] for p in probes])
    intra = float(np.mean(np.diag(sims)))
    inter = float((sims.sum() - np.trace(sims)) / (n * n - n))
    return intra, inter


def train_toy(
    dataset: ToyDataset,
    enc_cfg: EncoderConfig,
    dsp_cfg: DspConfig,
    epochs: int,
    seed: int = 0,
    optimizer: OptimizerState | None = None,
    batch_size: int = 8,
    callback=None,
):
    """Discriminative training of the encoder plus a linear speaker head.

    Returns ``(params, metrics)``. The last clip of every speaker is held
    out. Training examples are every single remaining clip plus one
    all-clips embedding per speaker; each epoch visits them in a seeded
    order, one Adam step per mini-batch.
    """
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    dataset.validate(2)
    n_spk = len(dataset.speakers)
    mels = [[melspectrogram(c, dsp_cfg).values for c in s.clips] for s in dataset.speakers]
    train = [m[:-1][: enc_cfg.max_cloning_samples] for m in mels]
    held_out = [m[-1] for m in mels]

    examples = []
    for label, clips in enumerate(train):
        examples.extend(([c], label) for c in clips)
        if len(clips) > 1:
            examples.append((clips, label))

    rng = np.random.default_rng(seed)
    params = EncoderParams.init(enc_cfg, seed=int(rng.integers(2**31)))
    bound = 1.0 / math.sqrt(enc_cfg.d_embedding)
    head = rng.uniform(-bound, bound, size=(enc_cfg.d_embedding, n_spk))
    state = optimizer or OptimizerState()

    metrics = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(examples))
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = [examples[i] for i in order[start : start + batch_size]]
            params, head, batch_loss = _minibatch_step(batch, params, head, enc_cfg, state)
            total += batch_loss
            if not np.all(np.isfinite(head)) or not all(np.all(np.isfinite(v)) for v in params.flat().values()):
                raise FloatingPointError(f"non-finite parameters in epoch {epoch}")

        enrolled = [encode_features(t, params, enc_cfg) for t in train]
        probes = [encode_features([h], params, enc_cfg) for h in held_out]
        intra, inter = separation(enrolled, probes)
        record = EpochMetrics(epoch, total / len(examples), intra, inter)
        metrics.append(record)
        if callback is not None:
            callback(record)
    return params, metrics


def _minibatch_step(batch, params, head, enc_cfg, state):
    grads = {k: np.zeros_like(v) for k, v in params.flat().items()}
    g_head = np.zeros_like(head)
    total = 0.0
    for feats, label in batch:
        emb = encode_features(feats, params, enc_cfg)
        loss, d_emb, d_head = classifier_loss(emb, label, head)
        total += loss
        g_head += d_head
        for k, v in encoder_backward(feats, params, enc_cfg, d_emb).flat().items():
            grads[k] += v
    scale = 1.0 / len(batch)
    grads = {k: v * scale for k, v in grads.items()}
    grads["head"] = g_head * scale
    flat = adam_step(dict(params.flat(), head=head), grads, state)
    head = flat.pop("head")
    return EncoderParams.from_flat(flat), head, total


# ---------------------------------------------------------------------------
# gradient verification


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(f, arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``arr``, perturbed in place."""
    grad = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + eps
        fp = f()
        arr[idx] = orig - eps
        fm = f()
        arr[idx] = orig
        grad[idx] = (fp - fm) / (2 * eps)
    return grad


GRADCHECK_CONFIG = EncoderConfig(
    d_mel=5, f_mapped=3, d_attn=4, num_heads=2, d_embedding=3, max_cloning_samples=2
)


@dataclass
class GradCheckReport:
    variant: str
    max_rel_error: dict  # group -> worst relative error
    max_abs_grad: dict  # group -> largest analytic gradient magnitude

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values())


def gradient_check_suite(enc_cfg: EncoderConfig = GRADCHECK_CONFIG, seed: int = 0, frames: int = 4,
                         samples: int = 2, eps: float = 1e-5, param_scale: float = 3.0) -> dict[str, GradCheckReport]:
    """Compare ``encoder_backward`` with central differences for both variants.

    Weights are drawn at ``param_scale`` times the usual init so the attention
    softmaxes are visibly non-uniform; at the default init their gradients are
    ~1e-5 and the comparison would say little.
    """
    reports = {}
    for variant in ("t1", "t2"):
        cfg = enc_cfg.with_variant(variant)
        rng = np.random.default_rng(seed)
        mels = [rng.uniform(0.0, 1.0, size=(frames, cfg.d_mel)) for _ in range(samples)]
        params = EncoderParams.init(cfg, seed=seed)
        for arr in params.flat().values():
            arr *= param_scale
        upstream = rng.normal(size=cfg.d_embedding)
        analytic = encoder_backward(mels, params, cfg, upstream).flat()

        def objective():
            return float(encode_features(mels, params, cfg) @ upstream)

        errors, mags = {}, {}
        for name, arr in params.flat().items():
            numeric = numeric_gradient(objective, arr, eps)
            errors[name] = float(relative_error(analytic[name], numeric).max())
            mags[name] = float(np.abs(analytic[name]).max())
        reports[variant] = GradCheckReport(variant, errors, mags)
    return reports
