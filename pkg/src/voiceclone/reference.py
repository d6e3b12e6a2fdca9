"""Straight-line scalar evaluation of the attention pooling equations.

Deliberately written with nested Python loops over plain lists so it shares
no code path (and no numpy reductions) with :mod:`voiceclone.attention`.
Only suitable for tiny instances.
"""

import math


def _matmul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = 0.0
            for k in range(inner):
                acc += a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def _elu(v):
    return v if v >= 0 else math.exp(v) - 1.0


def _softmax(xs):
    top = max(xs)
    exps = [math.exp(x - top) for x in xs]
    total = sum(exps)
    return [e / total for e in exps]


def _tolist(m):
    return m.tolist() if hasattr(m, "tolist") else m


def attention_weights(y, w_pre_k, w_pre_q, w_pre_v, w_head_k, w_head_q, w_head_v, w_out):
    """Temporal (or cross-sample) attention weights for rows of ``y``."""
    y = _tolist(y)
    n = len(y)
    heads = len(w_head_k)
    d_t = len(w_head_k[0][0])
    kp = [[_elu(v) for v in row] for row in _matmul(y, _tolist(w_pre_k))]
    qp = [[_elu(v) for v in row] for row in _matmul(y, _tolist(w_pre_q))]
    vp = [[_elu(v) for v in row] for row in _matmul(y, _tolist(w_pre_v))]
    concat = [[] for _ in range(n)]
    for i in range(heads):
        k = _matmul(kp, _tolist(w_head_k[i]))
        q = _matmul(qp, _tolist(w_head_q[i]))
        v = _matmul(vp, _tolist(w_head_v[i]))
        for t in range(n):
            logits = []
            for s in range(n):
                dot = 0.0
                for d in range(d_t):
                    dot += q[t][d] * k[s][d]
                logits.append(dot / math.sqrt(d_t))
            p = _softmax(logits)
            for d in range(d_t):
                acc = 0.0
                for s in range(n):
                    acc += p[s] * v[s][d]
                concat[t].append(acc)
    w_out = _tolist(w_out)
    scores = []
    for t in range(n):
        acc = 0.0
        for d in range(len(concat[t])):
            acc += concat[t][d] * w_out[d][0]
        scores.append(acc)
    return _softmax(scores)


def attention_pool(y, params):
    """``(weights, pooled)`` with ``params`` any object exposing the seven weight arrays."""
    a = attention_weights(
        y,
        params.w_pre_k,
        params.w_pre_q,
        params.w_pre_v,
        params.w_head_k,
        params.w_head_q,
        params.w_head_v,
        params.w_out,
    )
    y = _tolist(y)
    pooled = [sum(a[t] * y[t][d] for t in range(len(y))) for d in range(len(y[0]))]
    return a, pooled


def cross_sample_aggregate(e, cross_params, w_s):
    """Project every sample with ``w_s`` first, then take the attention-weighted sum."""
    a, _ = attention_pool(e, cross_params)
    projected = _matmul(_tolist(e), _tolist(w_s))
    dim = len(projected[0])
    return [sum(a[j] * projected[j][d] for j in range(len(projected))) for d in range(dim)]
