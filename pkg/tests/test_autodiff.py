import numpy as np
import pytest

from fsed import autodiff as ad
from fsed.errors import NonFiniteError, ShapeMismatchError, TapeError


def test_dot_forward():
    t = ad.Tape()
    s = ad.dot(ad.leaf(t, [1.0, 2.0]), ad.leaf(t, [3.0, 4.0]))
    assert s.data == 11.0


def test_l2_normalize_345():
    t = ad.Tape()
    y = ad.l2_normalize(ad.leaf(t, [3.0, 4.0]))
    assert np.allclose(y.data, [0.6, 0.8])


def test_sum_relu():
    t = ad.Tape()
    s = ad.asum(ad.relu(ad.leaf(t, [-1.0, 2.0, -3.0, 4.0])))
    assert s.data == 6.0


def test_backward_linear():
    t = ad.Tape()
    x = ad.leaf(t, [1.0, 2.0])
    s = ad.dot(x, ad.constant(t, [3.0, 4.0]))
    ad.backward(s)
    assert np.array_equal(x.grad, [3.0, 4.0])


def test_backward_normalize_self_dot_is_constant():
    # dot(l2_normalize(x), l2_normalize(x)) == 1, so d/dx == 0
    t = ad.Tape()
    x = ad.leaf(t, [0.3, -1.2, 2.0])
    y = ad.l2_normalize(x)
    s = ad.dot(y, y)
    assert abs(s.data - 1.0) < 1e-12
    ad.backward(s)
    assert np.allclose(x.grad, 0.0, atol=1e-14)


def test_backward_twice_identical():
    t = ad.Tape()
    x = ad.leaf(t, [1.0, 2.0, 3.0])
    s = ad.asum(ad.mul(x, x))
    ad.backward(s)
    first = x.grad.copy()
    ad.backward(s)
    assert np.array_equal(first, x.grad)


def test_backward_requires_scalar_root():
    t = ad.Tape()
    x = ad.leaf(t, [1.0, 2.0])
    with pytest.raises(TapeError):
        ad.backward(x)


def test_unused_leaf_gets_exact_zero_grad():
    t = ad.Tape()
    x = ad.leaf(t, [1.0, 2.0])
    unused = ad.leaf(t, [5.0, 6.0])
    ad.backward(ad.asum(x))
    assert np.array_equal(unused.grad, np.zeros(2))


def test_shape_mismatch_names_primitive():
    t = ad.Tape()
    a = ad.leaf(t, np.ones((2, 3)))
    b = ad.leaf(t, np.ones((2, 2)))
    with pytest.raises(ShapeMismatchError, match="matmul"):
        ad.matmul(a, b)
    with pytest.raises(ShapeMismatchError, match="add"):
        ad.add(a, b)


def test_non_finite_raises_with_node_index():
    t = ad.Tape()
    x = ad.leaf(t, [800.0])
    with pytest.raises(NonFiniteError):
        ad.exp(x)


def test_log_rejects_non_positive():
    t = ad.Tape()
    with pytest.raises(NonFiniteError):
        ad.log(ad.leaf(t, [0.0, 1.0]))


def test_l2_normalize_unit_norm_property():
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(200):
        v = rng.normal(size=6) * 10 ** rng.uniform(-6, 3)
        if np.linalg.norm(v) < 1e-9:
            continue
        t = ad.Tape()
        y = ad.l2_normalize(ad.leaf(t, v))
        assert abs(np.linalg.norm(y.data) - 1.0) < 1e-12


def test_l2_normalize_degenerate_flag():
    t = ad.Tape()
    y = ad.l2_normalize(ad.leaf(t, [1e-12, 0.0]))
    assert np.array_equal(y.data, [0.0, 0.0])
    assert t.degenerate_normalize
    ad.backward(ad.asum(y))  # gradient through the zero branch is zero
    assert np.array_equal(t.nodes[0].grad, np.zeros(2))


def test_pairwise_sqdist_values_and_grad():
    t = ad.Tape()
    a = ad.leaf(t, [[0.0, 0.0], [1.0, 1.0]])
    b = ad.leaf(t, [[1.0, 0.0]])
    d = ad.pairwise_sqdist(a, b)
    assert np.allclose(d.data, [[1.0], [1.0]])
    ad.backward(ad.asum(d))
    assert np.allclose(a.grad, [[-2.0, 0.0], [0.0, 2.0]])


def test_grad_check_quadratic():
    def f(x):
        return float(x @ x), 2 * x

    err = ad.grad_check(f, np.array([1.0, 2.0, 3.0]), step=1e-5)
    assert err <= 1e-8


def test_grad_check_reports_bad_gradient():
    def f(x):
        return float(x @ x), 3 * x  # wrong on purpose

    err = ad.grad_check(f, np.array([1.0, 2.0]), step=1e-5)
    assert err > 1e-3


def test_grad_check_non_finite_names_coordinate():
    def f(x):
        if x[1] > 1.0:
            return float("nan"), np.zeros(2)
        return float(x @ x), 2 * x

    with pytest.raises(NonFiniteError, match="coordinate 1"):
        ad.grad_check(f, np.array([0.0, 1.0]), step=1e-1)


def test_backward_deterministic_bitwise():
    rng = np.random.Generator(np.random.PCG64(3))
    v = rng.normal(size=(4, 4))
    grads = []
    for _ in range(2):
        t = ad.Tape()
        x = ad.leaf(t, v)
        y = ad.asum(ad.mul(ad.exp(ad.scale(x, 0.3)), ad.relu(x)))
        ad.backward(y)
        grads.append(x.grad.copy())
    assert np.array_equal(grads[0], grads[1])
