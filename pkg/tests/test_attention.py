import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voiceclone import reference
from voiceclone.attention import (
    AttentionConfig,
    AttentionParams,
    attention_pool,
    attention_pool_backward,
    elu,
    softmax,
)
from voiceclone.errors import ConfigError, EmptyVector, ShapeMismatch
from voiceclone.training import numeric_gradient, relative_error


def setup(seed, t=5, d_in=4, d_attn=4, heads=2, scale=1.0):
    cfg = AttentionConfig(d_in, d_attn, heads)
    rng = np.random.default_rng(seed)
    params = AttentionParams.init(cfg, rng)
    for _, arr in params.items():
        arr *= scale
    return cfg, params, rng.normal(size=(t, d_in))


def test_elu_values():
    assert elu(0.0) == 0.0
    assert elu(2.5) == 2.5
    assert elu(-1.0) == pytest.approx(math.exp(-1) - 1, abs=1e-15)
    assert elu(-1.0) == pytest.approx(-0.63212, abs=1e-5)


def test_softmax_basics():
    np.testing.assert_allclose(softmax(np.zeros(3)), [1 / 3] * 3, atol=1e-15)
    assert softmax(np.array([7.3])).tolist() == [1.0]
    with pytest.raises(EmptyVector):
        softmax(np.array([]))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-100, 100))
def test_softmax_probability_and_shift(xs, c):
    s = np.array(xs)
    p = softmax(s)
    assert np.all(p > 0)
    assert abs(p.sum() - 1) <= 1e-12
    np.testing.assert_allclose(softmax(s + c), p, atol=1e-12)


def test_config_rejects_indivisible():
    with pytest.raises(ConfigError):
        AttentionConfig(4, 15, 2)
    assert AttentionConfig(30, 16, 8).d_t == 2


def test_singleton_sequence():
    cfg, params, y = setup(0, t=1)
    w, pooled = attention_pool(y, params, cfg)
    assert w.tolist() == [1.0]
    np.testing.assert_array_equal(pooled, y[0])


def test_identical_rows_pool_to_that_row():
    cfg, params, _ = setup(1)
    v = np.array([0.3, -1.2, 2.0, 0.5])
    _, pooled = attention_pool(np.tile(v, (6, 1)), params, cfg)
    np.testing.assert_allclose(pooled, v, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_matches_loop_oracle(seed):
    cfg, params, y = setup(seed, scale=2.0)
    w, pooled = attention_pool(y, params, cfg)
    w_ref, pooled_ref = reference.attention_pool(y, params)
    np.testing.assert_allclose(w, w_ref, atol=1e-10, rtol=0)
    np.testing.assert_allclose(pooled, pooled_ref, atol=1e-10, rtol=0)


def test_shape_mismatch():
    cfg, params, y = setup(0)
    with pytest.raises(ShapeMismatch):
        attention_pool(y[:, :3], params, cfg)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.permutations(range(6)))
def test_weights_probability_and_permutation_invariance(seed, t, perm):
    cfg, params, y = setup(seed, t=t, scale=2.0)
    w, pooled = attention_pool(y, params, cfg)
    assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-12
    order = [i for i in perm if i < t]
    _, pooled_perm = attention_pool(y[order], params, cfg)
    assert np.max(np.abs(pooled - pooled_perm)) <= 1e-9
    lo, hi = y.min(axis=0), y.max(axis=0)
    assert np.all(pooled >= lo - 1e-12) and np.all(pooled <= hi + 1e-12)


def test_zero_upstream_gives_zero_gradients():
    cfg, params, y = setup(3)
    gy, gp = attention_pool_backward(y, params, cfg, np.zeros(4))
    assert not np.any(gy)
    assert all(not np.any(a) for _, a in gp.items())


def test_singleton_gradient_is_upstream():
    cfg, params, y = setup(4, t=1)
    g = np.array([0.5, -1.0, 2.0, 3.0])
    gy, gp = attention_pool_backward(y, params, cfg, g)
    np.testing.assert_array_equal(gy[0], g)
    assert all(np.max(np.abs(a)) < 1e-15 for _, a in gp.items())


@pytest.mark.parametrize("heads, d_attn, t", [(1, 3, 4), (2, 4, 6), (2, 2, 2)])
def test_backward_matches_finite_differences(heads, d_attn, t):
    cfg, params, y = setup(11 + t, t=t, d_attn=d_attn, heads=heads, scale=3.0)
    g = np.random.default_rng(5).normal(size=cfg.d_in)
    gy, gp = attention_pool_backward(y, params, cfg, g)

    def f():
        return float(attention_pool(y, params, cfg)[1] @ g)

    assert np.max(relative_error(gy, numeric_gradient(f, y))) <= 1e-4
    for name, arr in params.items():
        assert np.max(relative_error(getattr(gp, name), numeric_gradient(f, arr))) <= 1e-4, name
