import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqnav import autograd as ag
from seqnav.autograd import Tensor
from seqnav.gradcheck import OP_TOL, check, numeric_grad, rel_error
from seqnav.optim import AdamState, AdamW, adamw_step, clip_grad_norm


def param(rng, *shape, scale=1.0):
    return Tensor(rng.normal(size=shape) * scale, requires_grad=True)


# ---------------------------------------------------------------- forward examples


def test_matmul_identity_and_zero():
    a = ag.matmul(Tensor(np.eye(2)), Tensor([[3.0, 4.0], [5.0, 6.0]]))
    np.testing.assert_array_equal(a.data, [[3, 4], [5, 6]])
    z = ag.matmul(Tensor([[1.0, 2.0]]), Tensor([[0.0], [0.0]]))
    np.testing.assert_array_equal(z.data, [[0.0]])


def test_matmul_shape_mismatch_reports_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
        ag.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def test_masked_softmax_examples():
    np.testing.assert_allclose(ag.masked_softmax(Tensor([0.0, 0.0]), [0.0, 0.0]).data, [0.5, 0.5])
    out = ag.masked_softmax(Tensor([5.0, 9.0]), [0.0, ag.NEG_INF]).data
    assert out[0] == 1.0 and out[1] == 0.0


def test_masked_softmax_rejects_fully_masked_row():
    with pytest.raises(ValueError):
        ag.masked_softmax(Tensor(np.zeros((2, 3))), [[0, 0, 0], [ag.NEG_INF] * 3])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 9), st.integers(0, 2**31 - 1))
def test_masked_softmax_rows_normalized_blocked_exactly_zero(rows, cols, seed):
    masked_softmax_case(rows, cols, seed)


def masked_softmax_case(rows, cols, seed):
    rng = np.random.default_rng(seed)
    blocked = rng.random((rows, cols)) < 0.4
    blocked[np.arange(rows), rng.integers(cols, size=rows)] = False
    mask = np.where(blocked, ag.NEG_INF, 0.0)
    x = Tensor(rng.normal(size=(rows, cols)) * 5, requires_grad=True)
    p = ag.masked_softmax(x, mask)
    assert np.all(p.data >= 0)
    np.testing.assert_allclose(p.data.sum(-1), 1.0, atol=1e-6)
    assert np.all(p.data[blocked] == 0.0)
    ag.backward(ag.sum(p * Tensor(rng.normal(size=(rows, cols)))))
    assert np.all(x.grad[blocked] == 0.0)


def test_linear_examples():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    b = Tensor([1.0, -2.0])
    np.testing.assert_array_equal(ag.linear(x, Tensor(np.zeros((3, 2))), b).data, [[1, -2], [1, -2]])
    np.testing.assert_array_equal(ag.linear(x, Tensor(np.eye(3)), Tensor(np.zeros(3))).data, x.data)
    with pytest.raises(ValueError):
        ag.linear(x, Tensor(np.zeros((4, 2))))


def test_elementwise_examples():
    assert ag.tanh(Tensor(0.0)).data == 0.0
    assert ag.sigmoid(Tensor(0.0)).data == 0.5
    with pytest.raises(ValueError):
        ag.elementwise("add", Tensor(np.zeros(2)), Tensor(np.zeros(3)))
    with pytest.raises(ValueError):
        ag.elementwise("mul", Tensor(np.zeros((2, 1))), Tensor(np.zeros((2, 2))))


def test_tanh_gradient_at_one(f64):
    x = Tensor(1.0, requires_grad=True)
    ag.backward(ag.tanh(x))
    assert abs(x.grad - (1 - math.tanh(1.0) ** 2)) < 1e-12
    num = numeric_grad(lambda: ag.tanh(x), x)[0]
    assert abs(num - (1 - math.tanh(1.0) ** 2)) < 1e-6


def test_reduce_examples():
    x = Tensor([[1.0, 3.0], [3.0, 5.0]], requires_grad=True)
    out = ag.reduce("mean_over_rows", x)
    np.testing.assert_array_equal(out.data, [2.0, 4.0])
    np.testing.assert_array_equal(ag.reduce("mean_over_rows", Tensor([[7.0, 8.0]])).data, [7.0, 8.0])
    ag.backward(ag.sum(out))
    np.testing.assert_allclose(x.grad, 0.5)
    with pytest.raises(ValueError):
        ag.reduce("mean_over_rows", Tensor(np.zeros((0, 2))))


def test_loss_examples():
    assert abs(float(ag.losses("cross_entropy", Tensor([[0.0, 0.0]]), [0]).data) - math.log(2)) < 1e-6
    assert abs(float(ag.losses("binary_cross_entropy", Tensor([0.5]), [1.0]).data) - math.log(2)) < 1e-6
    with pytest.raises(ValueError):
        ag.cross_entropy(Tensor([[0.0, 0.0]]), [2])


def test_bce_clamps_out_of_range_probability(caplog):
    with caplog.at_level("DEBUG", logger="seqnav.autograd"):
        v = float(ag.binary_cross_entropy(Tensor([0.0]), [1.0]).data)
    assert abs(v - (-math.log(ag.BCE_EPS))) < 1e-3
    assert any("clamp" in r.message for r in caplog.records)


# ---------------------------------------------------------------- backward semantics


def test_backward_sum_gives_ones_and_accumulates():
    w = Tensor(np.random.default_rng(0).normal(size=(3, 2)), requires_grad=True)
    ag.backward(ag.sum(w))
    np.testing.assert_array_equal(w.grad, np.ones((3, 2)))
    ag.backward(ag.sum(w))
    np.testing.assert_array_equal(w.grad, 2 * np.ones((3, 2)))
    w.zero_grad()
    np.testing.assert_array_equal(w.grad, 0)


def test_backward_detached_and_nonscalar():
    w = Tensor(np.ones(3), requires_grad=True)
    other = Tensor(np.ones(3), requires_grad=True)
    ag.backward(ag.sum(w.detach() * other))
    np.testing.assert_array_equal(w.grad, 0)
    with pytest.raises(ValueError):
        ag.backward(w * 2.0)


def test_backward_visits_shared_node_once():
    x = Tensor(2.0, requires_grad=True)
    y = x * x
    ag.backward(y + y)  # d/dx 2x^2 = 4x
    assert x.grad == 8.0


def test_backward_bit_identical():
    rng = np.random.default_rng(3)
    w = Tensor(rng.normal(size=(4, 5)).astype(np.float32), requires_grad=True)
    x = Tensor(rng.normal(size=(6, 4)).astype(np.float32))

    def run():
        w.zero_grad()
        ag.backward(ag.mean(ag.gelu(ag.matmul(x, w))))
        return w.grad.copy()

    assert run().tobytes() == run().tobytes()


def test_float32_default():
    assert Tensor([1.0, 2.0]).data.dtype == np.float32
    with ag.precision(np.float64):
        assert Tensor([1.0]).data.dtype == np.float64


def test_no_grad_builds_no_graph():
    w = Tensor(np.ones(2), requires_grad=True)
    with ag.no_grad():
        y = ag.sum(w * 3.0)
    assert not y.requires_grad


# ---------------------------------------------------------------- finite differences


def test_tanh_linear_chain(f64):
    rng = np.random.default_rng(1)
    x, W, b = param(rng, 3, 4), param(rng, 4, 2), param(rng, 2)
    assert check(lambda: ag.sum(ag.tanh(ag.linear(x, W, b))), [x, W, b]) < OP_TOL


def test_matmul_gradient(f64):
    rng = np.random.default_rng(2)
    a, b = param(rng, 3, 4), param(rng, 4, 2)
    c = Tensor(rng.normal(size=(3, 2)))
    assert check(lambda: ag.sum(ag.matmul(a, b) * c), [a, b]) < OP_TOL


def test_five_class_cross_entropy_gradient(f64):
    rng = np.random.default_rng(4)
    z = param(rng, 6, 5, scale=2.0)
    t = rng.integers(5, size=6)
    assert check(lambda: ag.cross_entropy(z, t), [z]) < OP_TOL


def test_rel_error_guard():
    assert rel_error(np.zeros(3), np.zeros(3)) == 0.0
    assert rel_error(np.ones(2), np.ones(2) * 1.1) == pytest.approx(0.1 / 1.1)


# ---------------------------------------------------------------- optimizer


def test_adamw_lr_zero_and_zero_gradient():
    w = {"w": np.array([1.0, -2.0])}
    adamw_step(w, {"w": np.array([0.3, 0.1])}, AdamState(), lr=0.0, weight_decay=0.1)
    np.testing.assert_array_equal(w["w"], [1.0, -2.0])
    adamw_step(w, {"w": np.zeros(2)}, AdamState(), lr=0.1, weight_decay=0.0)
    np.testing.assert_array_equal(w["w"], [1.0, -2.0])


def test_adamw_descends_on_square():
    w = {"w": np.array([1.0])}
    adamw_step(w, {"w": 2 * w["w"].copy()}, AdamState(), lr=0.1)
    assert abs(w["w"][0]) < 1.0


def test_adamw_first_step_closed_form():
    # bias-corrected first step is lr * sign(g) (up to eps); decay is applied to w first
    w = {"w": np.array([2.0, -1.0])}
    g = np.array([0.5, -3.0])
    adamw_step(w, {"w": g}, AdamState(), lr=0.01, eps=0.0, weight_decay=0.1)
    expected = np.array([2.0, -1.0]) * (1 - 0.01 * 0.1) - 0.01 * np.sign(g)
    np.testing.assert_allclose(w["w"], expected, rtol=1e-12)


def test_adamw_skips_non_finite():
    state = AdamState()
    w = {"w": np.array([1.0])}
    assert not adamw_step(w, {"w": np.array([np.nan])}, state, lr=0.1)
    assert state.skipped == 1 and state.step == 0 and w["w"][0] == 1.0


def test_adamw_deterministic():
    def run():
        p = {"w": Tensor(np.linspace(-1, 1, 5), requires_grad=True)}
        opt = AdamW(p, lr=0.05)
        for k in range(5):
            opt.zero_grad()
            ag.backward(ag.sum(ag.square(p["w"] - float(k))))
            opt.step()
        return p["w"].data.tobytes()

    assert run() == run()


def test_clip_grad_norm():
    p = {"a": Tensor(np.zeros(2), requires_grad=True)}
    p["a"].grad = np.array([3.0, 4.0], dtype=np.float32)
    assert clip_grad_norm(p, 1.0) == pytest.approx(5.0)
    assert np.linalg.norm(p["a"].grad) == pytest.approx(1.0, rel=1e-5)
