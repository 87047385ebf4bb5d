import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgdl import nn
from mgdl.errors import DimensionError, DivergenceError

from conftest import central_difference, random_network, relative_error


def test_spec_layout():
    spec = nn.MlpSpec((3, 5, 2))
    assert spec.depth == 2
    assert spec.n_params == 5 * 3 + 5 + 2 * 5 + 2
    p = nn.MlpParams(spec)
    p.flat[:] = np.arange(spec.n_params)
    # row-major W_1, then b_1, then W_2, b_2
    assert p.weights[0][0, 1] == 1
    assert p.biases[0][0] == 15
    assert p.weights[1][0, 0] == 20


def test_from_arrays_roundtrip():
    W = [np.ones((4, 2)), 2 * np.ones((1, 4))]
    b = [np.zeros(4), np.array([3.0])]
    p = nn.MlpParams.from_arrays(W, b)
    assert p.spec.widths == (2, 4, 1)
    np.testing.assert_array_equal(p.weights[1], W[1])


def test_forward_hand_computed():
    p = nn.MlpParams.from_arrays([np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([[1.0, -2.0]])],
                                 [np.array([0.0, -1.0]), np.array([0.5])])
    tr = nn.forward(p.spec, p, [1.0, 2.0])
    # hidden: relu([-1, 2]) = [0, 2]; out = 0 - 4 + 0.5
    np.testing.assert_array_equal(tr.hidden[0], [0.0, 2.0])
    assert tr.output[0] == -3.5
    np.testing.assert_allclose(nn.predict(p, [[1.0, 2.0]]), [[-3.5]])
    np.testing.assert_allclose(nn.last_hidden(p, [[1.0, 2.0]]), [[0.0, 2.0]])


def test_forward_dimension_errors():
    spec = nn.MlpSpec((2, 3, 1))
    p = nn.MlpParams(spec)
    with pytest.raises(DimensionError):
        nn.forward(spec, p, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        nn.predict(p, np.zeros((4, 3)))


def test_relu_derivative_at_zero_is_zero():
    # pre-activation exactly 0 at the hidden unit, so no gradient flows to W_1
    p = nn.MlpParams.from_arrays([np.array([[1.0]]), np.array([[1.0]])],
                                 [np.array([-1.0]), np.array([0.0])])
    g, _ = nn.backward(p.spec, p, [[1.0]], [[1.0]])
    assert g.weights[0][0, 0] == 0.0
    assert g.biases[0][0] == 0.0


def test_mse_loss():
    assert nn.mse_loss([1.0, 2.0], [1.0, 4.0]) == 1.0
    with pytest.raises(ValueError):
        nn.mse_loss(np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(DimensionError):
        nn.mse_loss(np.zeros((2, 1)), np.zeros((2, 2)))


def test_gradient_matches_finite_differences(rng):
    for _ in range(10):
        spec, params = random_network(rng)
        X = rng.normal(size=(7, spec.input_dim))
        Y = rng.normal(size=(7, spec.output_dim))
        g, value = nn.backward(spec, params, X, Y)
        assert value == pytest.approx(nn.mse_loss(nn.predict(params, X), Y), rel=1e-14)
        num = central_difference(spec, params, X, Y)
        assert relative_error(g.flat, num).max() < 1e-5


def test_backward_detects_divergence():
    spec = nn.MlpSpec((1, 2, 1))
    p = nn.MlpParams(spec)
    p.flat[:] = 1e200
    with pytest.raises(DivergenceError):
        nn.backward(spec, p, [[1e200]], [[0.0]])


def test_adam_first_step_is_signed_lr():
    # with bias correction the first step is lr * g / (|g| + eps')
    spec = nn.MlpSpec((1, 1, 1))
    p = nn.MlpParams(spec)
    p.flat[:] = [0.5, 0.1, -0.3, 0.2]
    g = nn.MlpParams(spec, np.array([2.0, -0.5, 1e-3, 0.0]))
    new, st_ = nn.adam_step(p, g, nn.AdamState.fresh(p), lr=0.01)
    expect = p.flat - 0.01 * g.flat / (np.abs(g.flat) + 1e-8)
    np.testing.assert_allclose(new.flat, expect, rtol=1e-12, atol=0)
    assert st_.step == 1
    # inputs untouched
    assert p.flat[0] == 0.5


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(3)
    spec = nn.MlpSpec((2, 3, 1))
    p = nn.MlpParams(spec, rng.normal(size=spec.n_params))
    state = nn.AdamState.fresh(p)
    theta, m, v = p.flat.copy(), np.zeros(spec.n_params), np.zeros(spec.n_params)
    for t in range(1, 6):
        g = rng.normal(size=spec.n_params)
        p, state = nn.adam_step(p, nn.MlpParams(spec, g), state, lr=1e-2)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p.flat, theta, rtol=1e-12)


def test_lr_schedule_endpoints():
    cfg = nn.TrainConfig(t_max=1e-3, t_min=1e-5, epochs=100)
    assert nn.lr_at_epoch(cfg, 0) == 1e-3
    assert nn.lr_at_epoch(cfg, 100) == 1e-5
    assert nn.lr_at_epoch(cfg, 50) == pytest.approx(1e-4, rel=1e-12)
    with pytest.raises(ValueError):
        nn.lr_at_epoch(cfg, 101)
    flat = nn.TrainConfig(t_max=2e-3, t_min=2e-3, epochs=10)
    assert all(nn.lr_at_epoch(flat, k) == 2e-3 for k in range(11))


@pytest.mark.parametrize("kwargs", [
    dict(t_max=1e-4, t_min=1e-3, epochs=10),
    dict(t_max=1e-3, t_min=0.0, epochs=10),
    dict(t_max=1e-3, t_min=1e-4, epochs=0),
    dict(t_max=1e-3, t_min=1e-4, epochs=10, batch_size=0),
])
def test_train_config_rejects(kwargs):
    with pytest.raises(ValueError):
        nn.TrainConfig(**kwargs)


def test_xavier_statistics():
    spec = nn.MlpSpec((200, 300, 1))
    p = nn.xavier_init(spec, 0)
    W = p.weights[0]
    limit = math.sqrt(6.0 / 500)
    assert np.abs(W).max() <= limit
    # uniform on [-L, L] has variance L^2 / 3 = 2 / (d_in + d_out)
    assert W.var() == pytest.approx(2.0 / 500, rel=0.02)
    assert np.all(p.biases[0] == 0)


def test_xavier_seeded():
    spec = nn.MlpSpec((3, 4, 1))
    a, b = nn.xavier_init(spec, 7), nn.xavier_init(spec, 7)
    np.testing.assert_array_equal(a.flat, b.flat)
    assert not np.array_equal(a.flat, nn.xavier_init(spec, 8).flat)


def test_batch_slices_partition():
    rng = nn.make_rng(0)
    parts = nn.batch_slices(10, 3, rng)
    assert [len(s) for s in parts] == [3, 3, 3, 1]
    assert sorted(np.concatenate(parts).tolist()) == list(range(10))
    assert nn.batch_slices(10, "full", rng) == [None]
    assert nn.batch_slices(10, 64, rng) == [None]


def test_fit_reduces_loss_and_selects_best_val():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(64, 1))
    Y = np.sin(3 * X)
    cfg = nn.TrainConfig(3e-3, 1e-3, 200, batch_size=16)
    seen = []
    res = nn.fit(nn.MlpSpec((1, 16, 1)), X, Y, cfg, nn.make_rng(0), X[:16], Y[:16],
                 on_epoch=lambda k, p, lr, tl, vl: seen.append(k))
    assert seen == list(range(200))
    assert res.train_loss[-1] < 0.2 * res.train_loss[0]
    assert res.best_epoch == int(np.argmin(res.val_loss))
    best_val = nn.mse_loss(nn.predict(res.params, X[:16]), Y[:16])
    assert best_val == pytest.approx(res.val_loss[res.best_epoch], rel=1e-10)


def test_fit_deterministic():
    X = np.linspace(0, 1, 32).reshape(-1, 1)
    Y = np.cos(4 * X)
    cfg = nn.TrainConfig(1e-2, 1e-3, 20, batch_size=8)
    a = nn.fit(nn.MlpSpec((1, 8, 8, 1)), X, Y, cfg, nn.make_rng(5))
    b = nn.fit(nn.MlpSpec((1, 8, 8, 1)), X, Y, cfg, nn.make_rng(5))
    assert a.params.flat.tobytes() == b.params.flat.tobytes()
    assert a.train_loss == b.train_loss


@settings(max_examples=40, deadline=None)
@given(widths=st.lists(st.integers(1, 6), min_size=2, max_size=5),
       n=st.integers(1, 9), seed=st.integers(0, 2 ** 32 - 1))
def test_batch_forward_matches_single(widths, n, seed):
    spec = nn.MlpSpec(tuple(widths))
    p = nn.xavier_init(spec, seed)
    X = np.random.default_rng(seed).normal(size=(n, spec.input_dim))
    batched = nn.predict(p, X)
    single = np.stack([nn.forward(spec, p, x).output for x in X])
    np.testing.assert_allclose(batched, single, rtol=1e-12, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(t_max=st.floats(1e-6, 1e-1), ratio=st.floats(1e-4, 1.0), K=st.integers(1, 5000))
def test_lr_schedule_monotone_and_bounded(t_max, ratio, K):
    cfg = nn.TrainConfig(t_max, t_max * ratio, K)
    ks = np.unique(np.linspace(0, K, 20).astype(int))
    lrs = [nn.lr_at_epoch(cfg, int(k)) for k in ks]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    assert lrs[0] == t_max
    assert all(cfg.t_min * (1 - 1e-12) <= v <= t_max for v in lrs)
