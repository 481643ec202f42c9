"""Autodiff engine tests.

Gradient assertions come in two flavours: hand-derived closed forms for the
simple graphs, and central finite differences for everything composite.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentwalk import ContractViolation, DomainError, Tensor, no_grad
from latentwalk import tensor as T
from latentwalk.errors import ShapeMismatchError
from latentwalk.tensor import finite_diff_check


def _param(values):
    return Tensor(np.asarray(values, dtype=float), requires_grad=True)


# ---------------------------------------------------------------------------
# construction and bookkeeping


def test_tensor_wraps_scalars_and_arrays():
    assert Tensor(3.0).shape == ()
    assert Tensor([[1.0, 2.0]]).shape == (1, 2)
    assert Tensor(np.zeros((3, 4))).size == 12


def test_non_finite_input_rejected():
    with pytest.raises(DomainError):
        Tensor([np.nan, 1.0])
    with pytest.raises(DomainError):
        Tensor([np.inf])


def test_item_requires_scalar():
    assert Tensor(2.5).item() == 2.5
    with pytest.raises(ContractViolation):
        Tensor([1.0, 2.0]).item()


def test_backward_requires_scalar_loss():
    w = _param([1.0, 2.0])
    y = T.hadamard(w, w)
    with pytest.raises(ContractViolation):
        y.backward()


def test_detach_breaks_the_graph():
    w = _param([1.0, 2.0])
    y = T.tsum(T.hadamard(w, w).detach())
    y.backward()
    assert w.grad is None


def test_no_grad_suppresses_graph_building():
    w = _param([1.0, 2.0])
    with no_grad():
        y = T.tsum(T.hadamard(w, w))
    y.backward()  # detached constant: nothing to do, nothing to reach
    assert w.grad is None


# ---------------------------------------------------------------------------
# closed-form gradients


def test_sum_of_squares_gradient():
    """d/dw sum(w*w) = 2w."""
    w = _param([1.0, 2.0])
    loss = T.tsum(T.hadamard(w, w))
    loss.backward()
    assert np.allclose(w.grad, [2.0, 4.0])


def test_mean_gradient_is_uniform():
    w = _param([1.0, 2.0, 3.0, 4.0])
    T.tmean(w).backward()
    assert np.allclose(w.grad, [0.25, 0.25, 0.25, 0.25])


def test_matmul_gradients():
    a = _param([[1.0, 2.0], [3.0, 4.0]])
    b = _param([[5.0, 6.0], [7.0, 8.0]])
    T.tsum(T.matmul(a, b)).backward()
    ones = np.ones((2, 2))
    assert np.allclose(a.grad, ones @ np.asarray(b.data).T)
    assert np.allclose(b.grad, np.asarray(a.data).T @ ones)


def test_gradient_accumulates_across_uses():
    w = _param([2.0])
    loss = T.tsum(T.add(T.hadamard(w, w), w))  # w^2 + w -> 2w + 1 = 5
    loss.backward()
    assert np.allclose(w.grad, [5.0])


def test_zero_grad_resets():
    w = _param([1.0])
    T.tsum(w).backward()
    assert w.grad is not None
    w.zero_grad()
    assert w.grad is None


def test_leaky_relu_negative_slope():
    w = _param([-2.0, 3.0])
    out = T.leaky_relu(w, 0.2)
    assert np.allclose(out.data, [-0.4, 3.0])
    T.tsum(out).backward()
    assert np.allclose(w.grad, [0.2, 1.0])


def test_relu_gate():
    w = _param([-1.0, 0.5])
    out = T.relu(w)
    assert np.allclose(out.data, [0.0, 0.5])
    T.tsum(out).backward()
    assert np.allclose(w.grad, [0.0, 1.0])


def test_sigmoid_value_and_gradient():
    w = _param([0.0])
    s = T.sigmoid(w)
    assert np.allclose(s.data, [0.5])
    T.tsum(s).backward()
    assert np.allclose(w.grad, [0.25])  # s(1-s) at 0.5


def test_sigmoid_stays_finite_at_extremes():
    s = T.sigmoid(Tensor([-800.0, 800.0]))
    assert np.all(np.isfinite(s.data))
    assert s.data[0] >= 0.0 and s.data[1] <= 1.0


def test_log_rejects_non_positive():
    with pytest.raises(DomainError):
        T.log(Tensor([0.0]))
    with pytest.raises(DomainError):
        T.log(Tensor([-1.0]))


def test_exp_overflow_rejected():
    with pytest.raises(DomainError):
        T.exp(Tensor([1000.0]))


def test_broadcast_add_gradient_sums_over_broadcast_axes():
    """Bias gradients must collapse the batch axis."""
    x = _param(np.ones((4, 3)))
    b = _param(np.zeros(3))
    T.tsum(T.add(x, b)).backward()
    assert np.allclose(b.grad, [4.0, 4.0, 4.0])
    assert np.allclose(x.grad, np.ones((4, 3)))


def test_axis_sum_keeps_dims():
    x = _param(np.arange(6.0).reshape(2, 3))
    s = T.tsum(x, axis=1)
    assert s.shape == (2, 1)
    assert np.allclose(s.data, [[3.0], [12.0]])
    T.tsum(s).backward()
    assert np.allclose(x.grad, np.ones((2, 3)))


def test_concat_and_slice_roundtrip_gradients():
    a = _param(np.ones((2, 2)))
    b = _param(np.full((2, 3), 2.0))
    cat = T.concat([a, b], axis=1)
    assert cat.shape == (2, 5)
    left = T.tslice(cat, 0, 2, axis=1)
    T.tsum(left).backward()
    assert np.allclose(a.grad, np.ones((2, 2)))
    assert np.allclose(b.grad, np.zeros((2, 3)))


def test_slice_returns_copy_not_view():
    a = _param(np.arange(4.0).reshape(2, 2))
    piece = T.tslice(a, 0, 1, axis=1)
    piece.data[0, 0] = 99.0
    assert a.data[0, 0] == 0.0


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_apply_primitive_dispatch():
    out = T.apply_primitive("sum", _param([1.0, 2.0, 3.0]))
    assert out.item() == 6.0
    with pytest.raises(ContractViolation):
        T.apply_primitive("no-such-op", Tensor([1.0]))


def test_operator_sugar_matches_functions():
    a = _param([1.0, 2.0])
    b = _param([3.0, 4.0])
    assert np.allclose((a + b).data, [4.0, 6.0])
    assert np.allclose((a - b).data, [-2.0, -2.0])
    assert np.allclose((a * b).data, [3.0, 8.0])
    assert np.allclose((-a).data, [-1.0, -2.0])


# ---------------------------------------------------------------------------
# finite differences on composite graphs


def test_finite_diff_on_mlp_like_graph():
    rng = np.random.default_rng(0)
    w1 = _param(rng.normal(size=(3, 4)) * 0.5)
    b1 = _param(np.zeros(4))
    w2 = _param(rng.normal(size=(4, 1)) * 0.5)
    x = Tensor(rng.normal(size=(5, 3)))

    def loss():
        h = T.tanh(T.add(T.matmul(x, w1), b1))
        return T.tmean(T.hadamard(T.matmul(h, w2), T.matmul(h, w2)))

    assert finite_diff_check(loss, [w1, b1, w2]) < 1e-6


def test_finite_diff_on_log_exp_chain():
    w = _param([0.3, 0.7])

    def loss():
        return T.tsum(T.log(T.add(T.exp(w), Tensor([1.0, 1.0]))))

    assert finite_diff_check(loss, [w]) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=4),
       st.integers(min_value=0, max_value=2**31 - 1))
def test_finite_diff_random_small_graphs(n, m, seed):
    rng = np.random.default_rng(seed)
    w = _param(rng.normal(size=(n, m)) * 0.8)

    def loss():
        return T.tmean(T.hadamard(T.sigmoid(w), T.tanh(w)))

    assert finite_diff_check(loss, [w]) < 1e-5


# ---------------------------------------------------------------------------
# aliasing and purity


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_ops_do_not_mutate_inputs(seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(3, 3))
    a = Tensor(vals.copy())
    b = Tensor(vals.copy())
    for out in (T.add(a, b), T.sub(a, b), T.hadamard(a, b), T.matmul(a, b),
                T.relu(a), T.tanh(a), T.sigmoid(a), T.scale(a, 2.0)):
        out.data[...] = 123.0
    assert np.array_equal(a.data, vals)
    assert np.array_equal(b.data, vals)
