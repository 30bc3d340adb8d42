"""Per-op finite-difference checks for the tape engine."""

import numpy as np
import pytest

import loadcycle.nn.autodiff as ad
from loadcycle.nn.autodiff import Tensor


def fd_check(build, arrays, eps=1e-6, tol=1e-7):
    """build(tensors) -> scalar Tensor; FD-check every input array."""
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(tensors)
    loss.backward()
    rng = np.random.default_rng(0)
    for t in tensors:
        flat = t.data.reshape(-1)
        grad = t.grad.reshape(-1)
        # probe a subset of entries on big tensors
        idx = np.arange(flat.size)
        if flat.size > 40:
            idx = rng.choice(flat.size, 40, replace=False)
        for j in idx:
            keep = flat[j]
            flat[j] = keep + eps
            up = float(build([Tensor(x.data) for x in tensors]).data)
            flat[j] = keep - eps
            down = float(build([Tensor(x.data) for x in tensors]).data)
            flat[j] = keep
            numeric = (up - down) / (2 * eps)
            assert abs(grad[j] - numeric) <= tol * max(1.0, abs(numeric)), (
                f"entry {j}: analytic {grad[j]} vs numeric {numeric}"
            )


def scalarize(t, seed=1):
    w = np.random.default_rng(seed).standard_normal(t.data.shape)
    return ad.total(ad.mul(t, w))


RNG = np.random.default_rng(42)


def test_add_broadcast():
    a, b = RNG.standard_normal((3, 4)), RNG.standard_normal(4)
    fd_check(lambda ts: scalarize(ad.add(ts[0], ts[1])), [a, b])


def test_sub_mul():
    a, b = RNG.standard_normal((2, 5)), RNG.standard_normal((2, 5))
    fd_check(lambda ts: scalarize(ad.mul(ad.sub(ts[0], ts[1]), ts[0])), [a, b])


def test_matmul_2d_and_3d():
    a, w = RNG.standard_normal((4, 3)), RNG.standard_normal((3, 2))
    fd_check(lambda ts: scalarize(ad.matmul(ts[0], ts[1])), [a, w])
    a3 = RNG.standard_normal((2, 4, 3))
    fd_check(lambda ts: scalarize(ad.matmul(ts[0], ts[1])), [a3, w])


def test_nonlinearities():
    a = RNG.standard_normal((3, 4))
    fd_check(lambda ts: scalarize(ad.sigmoid(ts[0])), [a])
    fd_check(lambda ts: scalarize(ad.tanh(ts[0])), [a])
    a_clear = a + np.sign(a) * 0.05  # keep away from the ReLU kink
    fd_check(lambda ts: scalarize(ad.relu(ts[0])), [a_clear])


def test_power():
    a = np.abs(RNG.standard_normal((3, 3))) + 0.5
    fd_check(lambda ts: scalarize(ad.power(ts[0], -0.5)), [a])


def test_mean_axes():
    a = RNG.standard_normal((2, 3, 4))
    fd_check(lambda ts: scalarize(ad.mean(ts[0], axis=2)), [a])
    fd_check(lambda ts: scalarize(ad.mean(ts[0], axis=(0, 2), keepdims=True)), [a])


def test_index_concat_reshape_transpose():
    a = RNG.standard_normal((3, 4, 5))
    fd_check(lambda ts: scalarize(ad.index(ts[0], (slice(None), 2, slice(None)))), [a])
    fd_check(lambda ts: scalarize(ad.index(ts[0], (slice(None), slice(1, 3)))), [a])
    b = RNG.standard_normal((3, 2, 5))
    fd_check(lambda ts: scalarize(ad.concat([ts[0], ts[1]], axis=1)), [a, b])
    fd_check(lambda ts: scalarize(ad.reshape(ts[0], (3, 20))), [a])
    fd_check(lambda ts: scalarize(ad.transpose(ts[0], (2, 0, 1))), [a])


def test_conv1d_gradients():
    x = RNG.standard_normal((2, 3, 9))
    w = RNG.standard_normal((4, 3, 5))
    b = RNG.standard_normal(4)
    fd_check(lambda ts: scalarize(ad.conv1d(ts[0], ts[1], ts[2])), [x, w, b])


def test_conv1d_relu_gradients_two_channel():
    # 2 channels, T=7, 3 filters, with the ReLU the layer actually uses
    x = RNG.standard_normal((1, 2, 7))
    w = RNG.standard_normal((3, 2, 5))
    b = RNG.standard_normal(3)
    fd_check(
        lambda ts: scalarize(ad.relu(ad.conv1d(ts[0], ts[1], ts[2]))),
        [x, w, b],
        tol=1e-5,
    )


def test_lstm_sequence_gradients():
    u, T, B = 3, 6, 2
    xp = RNG.standard_normal((B, T, 4 * u))
    rec = RNG.standard_normal((u, 4 * u)) * 0.5
    fd_check(lambda ts: scalarize(ad.lstm_sequence(ts[0], ts[1])), [xp, rec])


def test_flip_gradients():
    a = RNG.standard_normal((2, 5, 3))
    fd_check(lambda ts: scalarize(ad.flip(ts[0], 1)), [a])


def test_conv1d_even_kernel_padding():
    # TF 'same' convention: (K-1)//2 zeros left, the rest right
    x = np.arange(6, dtype=float).reshape(1, 1, 6)
    w = np.ones((1, 1, 4))
    out = ad.conv1d(Tensor(x), Tensor(w), Tensor(np.zeros(1))).data[0, 0]
    # pad_left=1: out[t] = x[t-1]+x[t]+x[t+1]+x[t+2] with zero padding
    assert out[0] == 0 + 0 + 1 + 2
    assert out[2] == 1 + 2 + 3 + 4
    assert out[5] == 4 + 5 + 0 + 0


def test_softmax_cross_entropy_value_and_grad():
    logits = RNG.standard_normal((5, 3))
    y = np.array([0, 2, 1, 1, 0])
    w = np.array([1.0, 2.0, 0.5])
    fd_check(
        lambda ts: ad.softmax_cross_entropy(ts[0], y, w),
        [logits],
        tol=1e-6,
    )
    # uniform prediction, unit weights: ln 3
    loss = ad.softmax_cross_entropy(Tensor(np.zeros((4, 3))), np.array([0, 1, 2, 0]), np.ones(3))
    assert float(loss.data) == pytest.approx(np.log(3.0), abs=1e-12)


def test_perfect_prediction_loss_near_zero():
    logits = np.full((3, 3), -60.0)
    logits[np.arange(3), [0, 1, 2]] = 60.0
    loss = ad.softmax_cross_entropy(Tensor(logits), np.array([0, 1, 2]), np.ones(3))
    assert 0.0 <= float(loss.data) < 1e-12


def test_log_clamp_guards_impossible_prediction():
    logits = np.zeros((1, 3))
    logits[0] = [800.0, -800.0, 0.0]  # p[1] underflows to 0; clamp keeps log finite
    loss = ad.softmax_cross_entropy(Tensor(logits), np.array([1]), np.ones(3))
    assert np.isfinite(float(loss.data))
    assert float(loss.data) == pytest.approx(-np.log(ad.LOG_CLAMP))


def test_softmax_rows():
    p = ad.softmax(RNG.standard_normal((10, 3)))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(p > 0) and np.all(p < 1)


def test_grad_accumulates_over_fanout():
    a = Tensor(np.array([2.0, 3.0]), requires_grad=True)
    out = ad.total(ad.add(ad.mul(a, a), a))  # sum(a^2 + a)
    out.backward()
    np.testing.assert_allclose(a.grad, 2 * a.data + 1)


def test_no_graph_without_grads():
    a = Tensor(np.ones((2, 2)))
    out = ad.mul(ad.add(a, a), a)
    assert out._parents == () and not out.requires_grad


def test_dtype_preserved():
    a = Tensor(np.ones((2, 2), dtype=np.float32))
    assert ad.sigmoid(ad.mul(a, 2.0)).dtype == np.float32
