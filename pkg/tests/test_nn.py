import math

import numpy as np
import pytest

from oracles import bce_grad_loop, bce_loop, fd_gradient, relative_error

from pacer import nn
from pacer.nn import AdamState, Tensor, adam_step


def T(arr, **kw):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True, dtype=np.float64, **kw)


def rand_projection_loss(out, rng):
    w = Tensor(rng.standard_normal(out.data.shape), dtype=out.data.dtype)
    return nn.tsum(nn.mul(out, w))


# ---------------------------------------------------------------------------
# forward semantics


def test_conv2d_all_ones_sums():
    x = Tensor(np.ones((1, 1, 3, 3), np.float32))
    w = Tensor(np.ones((1, 1, 3, 3), np.float32))
    b = Tensor(np.zeros(1, np.float32))
    out = nn.conv2d(x, w, b)
    assert out.data.shape == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == 9.0


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(0)
    x = Tensor(rng.random((2, 1, 6, 6), dtype=np.float32))
    k = np.zeros((1, 1, 3, 3), np.float32)
    k[0, 0, 1, 1] = 1.0
    out = nn.conv2d(x, Tensor(k), Tensor(np.zeros(1, np.float32)), stride=1, padding=1)
    assert np.allclose(out.data, x.data)


def test_conv2d_output_shape_formula():
    x = Tensor(np.zeros((1, 3, 11, 9), np.float32))
    w = Tensor(np.zeros((5, 3, 3, 3), np.float32))
    b = Tensor(np.zeros(5, np.float32))
    out = nn.conv2d(x, w, b, stride=2, padding=1)
    assert out.data.shape == (1, 5, (11 + 2 - 3) // 2 + 1, (9 + 2 - 3) // 2 + 1)


def test_conv2d_shape_mismatch():
    x = Tensor(np.zeros((1, 3, 8, 8), np.float32))
    w = Tensor(np.zeros((4, 2, 3, 3), np.float32))
    with pytest.raises(ValueError):
        nn.conv2d(x, w, Tensor(np.zeros(4, np.float32)))


def test_sigmoid_and_relu_values():
    assert nn.sigmoid(Tensor(np.zeros(1, np.float32))).data[0] == 0.5
    x = Tensor(np.array([-2.0, 0.0, 3.0], dtype=np.float32))
    assert np.allclose(nn.relu(x).data, [0.0, 0.0, 3.0])


def test_sigmoid_extreme_inputs_stable():
    x = Tensor(np.array([-500.0, 500.0], dtype=np.float32))
    out = nn.sigmoid(x).data
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0


def test_concat_then_split_roundtrip():
    rng = np.random.default_rng(1)
    a = Tensor(rng.random((2, 3, 4, 4), dtype=np.float32))
    b = Tensor(rng.random((2, 2, 4, 4), dtype=np.float32))
    cat = nn.concat_channels(a, b)
    assert np.array_equal(cat.data[:, :3], a.data)
    assert np.array_equal(cat.data[:, 3:], b.data)


def test_upsample_nearest_values():
    x = Tensor(np.arange(4, dtype=np.float32).reshape(1, 1, 2, 2))
    up = nn.upsample_nearest2x(x).data[0, 0]
    assert np.array_equal(up[:2, :2], np.full((2, 2), 0.0))
    assert np.array_equal(up[2:, 2:], np.full((2, 2), 3.0))


def test_global_avg_pool_matches_mean():
    rng = np.random.default_rng(2)
    x = rng.random((3, 4, 5, 6)).astype(np.float32)
    out = nn.global_avg_pool(Tensor(x)).data
    assert np.allclose(out, x.mean(axis=(2, 3)), atol=1e-6)


def test_linear_matches_matmul():
    rng = np.random.default_rng(3)
    x = rng.random((4, 6)).astype(np.float32)
    w = rng.random((3, 6)).astype(np.float32)
    b = rng.random(3).astype(np.float32)
    out = nn.linear(Tensor(x), Tensor(w), Tensor(b)).data
    assert np.allclose(out, x @ w.T + b, atol=1e-6)


# ---------------------------------------------------------------------------
# loss


def test_bce_half_everywhere_is_ln2():
    p = Tensor(np.full((4, 4), 0.5, np.float32))
    t = np.full((4, 4), 0.5, np.float32)
    loss = nn.bce_per_pixel(p, t, np.ones((4, 4), bool))
    assert abs(loss.item() - math.log(2)) < 1e-6


def test_bce_perfect_saturated_predictions_near_zero():
    t = np.array([[0.0, 1.0], [1.0, 0.0]], np.float32)
    loss = nn.bce_per_pixel(Tensor(t.copy()), t, np.ones((2, 2), bool))
    assert loss.item() < 1e-5


def test_bce_matches_loop_oracle_value_and_grad():
    rng = np.random.default_rng(4)
    pred = rng.uniform(0.05, 0.95, (4, 4))
    target = rng.random((4, 4))
    mask = rng.random((4, 4)) > 0.25
    p = T(pred)
    loss = nn.bce_per_pixel(p, target, mask)
    assert abs(loss.item() - bce_loop(pred, target, mask)) < 1e-6
    loss.backward()
    assert np.abs(p.grad - bce_grad_loop(pred, target, mask)).max() < 1e-6


def test_bce_empty_mask_errors():
    with pytest.raises(ValueError, match="empty mask"):
        nn.bce_per_pixel(Tensor(np.full((2, 2), 0.5)), np.zeros((2, 2)), np.zeros((2, 2), bool))


def test_bce_masked_pixels_get_zero_gradient():
    rng = np.random.default_rng(5)
    pred = T(rng.uniform(0.2, 0.8, (3, 3)))
    target = rng.random((3, 3))
    mask = np.ones((3, 3), bool)
    mask[1, 1] = False
    loss = nn.bce_per_pixel(pred, target, mask)
    loss.backward()
    assert pred.grad[1, 1] == 0.0
    # and perturbing the masked target changes nothing
    target2 = target.copy()
    target2[1, 1] = 0.123
    assert nn.bce_per_pixel(pred, target2, mask).item() == loss.item()


# ---------------------------------------------------------------------------
# reverse mode


def test_backward_square():
    x = T(np.array(3.0))
    y = nn.mul(x, x)
    y.backward()
    assert x.grad == pytest.approx(6.0)


def test_backward_accumulates_shared_branches():
    x = T(np.array(2.0))
    y = nn.add(nn.mul(x, x), nn.mul(x, Tensor(np.array(5.0), dtype=np.float64)))
    y.backward()
    assert x.grad == pytest.approx(2 * 2 + 5)


def test_backward_linearity_of_sum():
    rng = np.random.default_rng(6)
    a = rng.random((3, 3))
    x1 = T(a.copy())
    l1 = nn.tsum(nn.mul(x1, x1))
    l1.backward()
    g1 = x1.grad.copy()

    x2 = T(a.copy())
    l2 = nn.tsum(nn.relu(x2))
    l2.backward()
    g2 = x2.grad.copy()

    x3 = T(a.copy())
    both = nn.add(nn.tsum(nn.mul(x3, x3)), nn.tsum(nn.relu(x3)))
    both.backward()
    assert np.array_equal(x3.grad, g1 + g2)


def test_non_participating_grads_stay_zero():
    x = T(np.ones(3))
    bystander = T(np.ones(3))
    nn.tsum(nn.mul(x, x)).backward()
    assert np.array_equal(bystander.grad, np.zeros(3))


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        T(np.ones(3)).backward()


def test_forward_and_grad_deterministic():
    rng = np.random.default_rng(7)
    x_val = rng.random((2, 3, 8, 8)).astype(np.float32)
    w_val = rng.random((4, 3, 3, 3)).astype(np.float32)
    outs, grads = [], []
    for _ in range(2):
        x = Tensor(x_val.copy(), requires_grad=True)
        w = Tensor(w_val.copy(), requires_grad=True)
        out = nn.conv2d(x, w, Tensor(np.zeros(4, np.float32), requires_grad=True), 1, 1)
        loss = nn.tsum(nn.sigmoid(out))
        loss.backward()
        outs.append(out.data.copy())
        grads.append(w.grad.copy())
    assert np.array_equal(outs[0], outs[1])
    assert np.array_equal(grads[0], grads[1])


# ---------------------------------------------------------------------------
# finite differences, one op per class


OPS = {
    "conv2d_s1p1": (lambda ts: nn.conv2d(ts["x"], ts["w"], ts["b"], 1, 1), ("x", "w", "b")),
    "conv2d_s2p0": (lambda ts: nn.conv2d(ts["x"], ts["w"], ts["b"], 2, 0), ("x", "w", "b")),
    "relu": (lambda ts: nn.relu(ts["x"]), ("x",)),
    "sigmoid": (lambda ts: nn.sigmoid(ts["x"]), ("x",)),
    "upsample": (lambda ts: nn.upsample_nearest2x(ts["x"]), ("x",)),
    "concat": (lambda ts: nn.concat_channels(ts["x"], ts["y"]), ("x", "y")),
    "gap": (lambda ts: nn.global_avg_pool(ts["x"]), ("x",)),
    "tile": (lambda ts: nn.tile_spatial(ts["v"], 3, 4), ("v",)),
    "linear": (lambda ts: nn.linear(ts["m"], ts["w2"], ts["b2"]), ("m", "w2", "b2")),
}


def _op_tensors(rng):
    # |x| is kept off zero so the relu trials never finite-difference
    # across the subgradient kink
    x = rng.standard_normal((2, 3, 6, 6))
    x += np.where(x >= 0, 0.01, -0.01)
    return {
        "x": T(x),
        "y": T(rng.standard_normal((2, 2, 6, 6))),
        "w": T(rng.standard_normal((4, 3, 3, 3)) * 0.5),
        "b": T(rng.standard_normal(4) * 0.1),
        "v": T(rng.standard_normal((2, 5))),
        "m": T(rng.standard_normal((4, 6))),
        "w2": T(rng.standard_normal((3, 6)) * 0.5),
        "b2": T(rng.standard_normal(3) * 0.1),
    }


@pytest.mark.parametrize("name", sorted(OPS))
def test_gradients_match_finite_differences(name):
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    op, used = OPS[name]
    for trial in range(3):
        ts = _op_tensors(rng)
        out = op(ts)
        proj = rng.standard_normal(out.data.shape)

        def loss_value():
            return float((op(ts).data * proj).sum())

        loss = nn.tsum(nn.mul(op(ts), Tensor(proj, dtype=np.float64)))
        for t in ts.values():
            t.zero_grad()
        loss.backward()
        for key in used:
            t = ts[key]
            fd = fd_gradient(loss_value, t.data, h=1e-4)
            assert relative_error(t.grad, fd) < 1e-3, f"{name}/{key}"


# ---------------------------------------------------------------------------
# optimizer


def test_adam_first_step_magnitude():
    p = Tensor(np.array([0.0], np.float32), requires_grad=True)
    p.grad[:] = 1.0
    adam_step({"p": p}, AdamState(), lr=0.1)
    assert p.data[0] == pytest.approx(-0.1, rel=1e-4)


def test_adam_zero_grad_no_change():
    p = Tensor(np.array([1.5], np.float32), requires_grad=True)
    adam_step({"p": p}, AdamState(), lr=0.1)
    assert p.data[0] == 1.5


def test_adam_converges_on_quadratic():
    # minimize (x - 2)^2; closed-form minimum at 2. The step size is chosen
    # so the sign-flipping tail of Adam settles inside the tolerance.
    p = Tensor(np.array([0.0], np.float32), requires_grad=True)
    state = AdamState()
    for _ in range(100):
        p.zero_grad()
        p.grad[:] = 2.0 * (p.data - 2.0)
        adam_step({"p": p}, state, lr=0.3)
    assert abs(float(p.data[0]) - 2.0) < 1e-3


def test_adam_deterministic():
    runs = []
    for _ in range(2):
        p = Tensor(np.array([0.3, -0.7], np.float32), requires_grad=True)
        state = AdamState()
        for k in range(17):
            p.zero_grad()
            p.grad[:] = np.sin(p.data) + 0.1 * k
            adam_step({"p": p}, state, lr=0.03)
        runs.append(p.data.copy())
    assert np.array_equal(runs[0], runs[1])
