"""Multi-head self-attention pooling with an exact reverse-mode gradient.

Forward pass for one sequence ``Y`` of shape (T, d_in)::

    K' = ELU(Y Wk')                  (T, d_attn)     likewise Q', V'
    K_i = K' Wk[i]                   (T, d_t)        likewise Q_i, V_i
    head_i = softmax(Q_i K_i^T / sqrt(d_t)) V_i
    scores = concat(head_1..head_I) w_out          (T,)
    weights = softmax(scores)
    pooled = sum_t weights[t] Y[t]

No positional information enters, so ``pooled`` is invariant to row order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, EmptyInput, EmptyVector, ShapeMismatch


def elu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 1.0, np.exp(np.minimum(x, 0.0)))


def softmax(scores, axis=-1):
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise EmptyVector("softmax of an empty vector")
    z = np.exp(s - s.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class AttentionConfig:
    d_in: int
    d_attn: int
    num_heads: int

    def __post_init__(self):
        if min(self.d_in, self.d_attn, self.num_heads) < 1:
            raise ConfigError("attention dimensions must all be >= 1")
        if self.d_attn % self.num_heads:
            raise ConfigError(
                f"d_attn={self.d_attn} is not divisible by num_heads={self.num_heads}"
            )

    @property
    def d_t(self) -> int:
        return self.d_attn // self.num_heads


@dataclass
class AttentionParams:
    w_pre_k: np.ndarray  # (d_in, d_attn)
    w_pre_q: np.ndarray
    w_pre_v: np.ndarray
    w_head_k: np.ndarray  # (num_heads, d_attn, d_t)
    w_head_q: np.ndarray
    w_head_v: np.ndarray
    w_out: np.ndarray  # (d_attn, 1)

    @classmethod
    def init(cls, cfg: AttentionConfig, rng: np.random.Generator) -> "AttentionParams":
        """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""

        def u(*shape, fan_in):
            bound = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        h, d_in, d_attn, d_t = cfg.num_heads, cfg.d_in, cfg.d_attn, cfg.d_t
        return cls(
            w_pre_k=u(d_in, d_attn, fan_in=d_in),
            w_pre_q=u(d_in, d_attn, fan_in=d_in),
            w_pre_v=u(d_in, d_attn, fan_in=d_in),
            w_head_k=u(h, d_attn, d_t, fan_in=d_attn),
            w_head_q=u(h, d_attn, d_t, fan_in=d_attn),
            w_head_v=u(h, d_attn, d_t, fan_in=d_attn),
            w_out=u(d_attn, 1, fan_in=d_attn),
        )

    @classmethod
    def zeros(cls, cfg: AttentionConfig) -> "AttentionParams":
        h, d_in, d_attn, d_t = cfg.num_heads, cfg.d_in, cfg.d_attn, cfg.d_t
        return cls(
            np.zeros((d_in, d_attn)),
            np.zeros((d_in, d_attn)),
            np.zeros((d_in, d_attn)),
            np.zeros((h, d_attn, d_t)),
            np.zeros((h, d_attn, d_t)),
            np.zeros((h, d_attn, d_t)),
            np.zeros((d_attn, 1)),
        )

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def items(self):
        return [(name, getattr(self, name)) for name in self.field_names()]

    def copy(self) -> "AttentionParams":
        return AttentionParams(**{k: v.copy() for k, v in self.items()})

    def check(self, cfg: AttentionConfig) -> None:
        expected = {
            "w_pre_k": (cfg.d_in, cfg.d_attn),
            "w_pre_q": (cfg.d_in, cfg.d_attn),
            "w_pre_v": (cfg.d_in, cfg.d_attn),
            "w_head_k": (cfg.num_heads, cfg.d_attn, cfg.d_t),
            "w_head_q": (cfg.num_heads, cfg.d_attn, cfg.d_t),
            "w_head_v": (cfg.num_heads, cfg.d_attn, cfg.d_t),
            "w_out": (cfg.d_attn, 1),
        }
        for name, arr in self.items():
            if arr.shape != expected[name]:
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {expected[name]}")


@dataclass
class _Cache:
    y: np.ndarray
    pre: dict  # name -> pre-activation (T, d_attn)
    act: dict  # name -> ELU output
    proj: dict  # name -> (I, T, d_t)
    probs: np.ndarray  # (I, T, T)
    concat: np.ndarray  # (T, d_attn)
    weights: np.ndarray  # (T,)


def _forward(y, params: AttentionParams, cfg: AttentionConfig) -> _Cache:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != cfg.d_in:
        raise ShapeMismatch(f"input has shape {y.shape}, expected (T, {cfg.d_in})")
    if y.shape[0] == 0:
        raise EmptyInput("attention over zero rows")
    params.check(cfg)
    pre, act, proj = {}, {}, {}
    for key, w_pre, w_head in (
        ("k", params.w_pre_k, params.w_head_k),
        ("q", params.w_pre_q, params.w_head_q),
        ("v", params.w_pre_v, params.w_head_v),
    ):
        pre[key] = y @ w_pre
        act[key] = elu(pre[key])
        proj[key] = np.einsum("ta,had->htd", act[key], w_head)
    logits = np.einsum("htd,hsd->hts", proj["q"], proj["k"]) / math.sqrt(cfg.d_t)
    probs = softmax(logits, axis=-1)
    heads = np.einsum("hts,hsd->htd", probs, proj["v"])
    concat = heads.transpose(1, 0, 2).reshape(y.shape[0], cfg.d_attn)
    weights = softmax(concat @ params.w_out[:, 0])
    return _Cache(y, pre, act, proj, probs, concat, weights)


def attention_pool(y, params: AttentionParams, cfg: AttentionConfig):
    """Return ``(weights, pooled)`` for a (T, d_in) sequence."""
    cache = _forward(y, params, cfg)
    return cache.weights, cache.weights @ cache.y


def attention_pool_backward(y, params: AttentionParams, cfg: AttentionConfig, upstream_grad):
    """Gradients of ``upstream_grad . pooled`` w.r.t. ``y`` and every parameter."""
    cache = _forward(y, params, cfg)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != (cfg.d_in,):
        raise ShapeMismatch(f"upstream_grad has shape {g.shape}, expected ({cfg.d_in},)")
    return _backward(cache, params, cfg, g)


def _backward(cache: _Cache, params: AttentionParams, cfg: AttentionConfig, g):
    a, y = cache.weights, cache.y
    T = y.shape[0]
    grad_y = np.outer(a, g)
    d_a = y @ g
    d_scores = a * (d_a - a @ d_a)
    grads = {"w_out": (cache.concat.T @ d_scores)[:, None]}
    d_concat = np.outer(d_scores, params.w_out[:, 0])
    d_heads = d_concat.reshape(T, cfg.num_heads, cfg.d_t).transpose(1, 0, 2)

    p = cache.probs
    q, k, v = cache.proj["q"], cache.proj["k"], cache.proj["v"]
    d_p = np.einsum("htd,hsd->hts", d_heads, v)
    d_proj = {"v": np.einsum("hts,htd->hsd", p, d_heads)}
    d_logits = p * (d_p - np.sum(d_p * p, axis=-1, keepdims=True)) / math.sqrt(cfg.d_t)
    d_proj["q"] = np.einsum("hts,hsd->htd", d_logits, k)
    d_proj["k"] = np.einsum("hts,htd->hsd", d_logits, q)

    for key in ("k", "q", "v"):
        w_head = getattr(params, f"w_head_{key}")
        grads[f"w_head_{key}"] = np.einsum("ta,htd->had", cache.act[key], d_proj[key])
        d_act = np.einsum("htd,had->ta", d_proj[key], w_head)
        d_pre = d_act * elu_grad(cache.pre[key])
        grads[f"w_pre_{key}"] = y.T @ d_pre
        grad_y += d_pre @ getattr(params, f"w_pre_{key}").T
    return grad_y, AttentionParams(**grads)
