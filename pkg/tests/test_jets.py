import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chordflow.jets import Jet, const, dot, seed, smoothstep, stack


def fd_check(fn, u0, h=1e-6):
    """Finite-difference gradient/Hessian of a scalar jet function at u0."""
    m = len(u0)
    jet = fn(seed(np.array([u0])))
    val, grad, hess = jet.val[0], jet.grad[0], jet.hess[0]
    for i in range(m):
        up, dn = np.array(u0, float), np.array(u0, float)
        up[i] += h
        dn[i] -= h
        g_fd = (fn(seed(np.array([up]))).val[0] - fn(seed(np.array([dn]))).val[0]) / (2 * h)
        assert abs(g_fd - grad[i]) < 5e-6 * max(1.0, abs(grad[i]))
        for j in range(m):
            upj = np.array(u0, float)
            upj[i] += h
            upj[j] += h
            dnj = np.array(u0, float)
            dnj[i] -= h
            dnj[j] -= h
            pj = np.array(u0, float)
            pj[i] += h
            pj[j] -= h
            jp = np.array(u0, float)
            jp[i] -= h
            jp[j] += h
            h_fd = (fn(seed(np.array([upj]))).val[0] - fn(seed(np.array([pj]))).val[0]
                    - fn(seed(np.array([jp]))).val[0] + fn(seed(np.array([dnj]))).val[0]) / (4 * h * h)
            assert abs(h_fd - hess[i, j]) < 2e-4 * max(1.0, abs(hess[i, j]))
    return val, grad, hess


def test_polynomial_exact():
    def f(u):
        x, y = u
        return x * x * y + 3.0 * x - y * y * y

    u0 = [0.7, -1.3]
    jet = f(seed(np.array([u0])))
    x, y = u0
    assert np.isclose(jet.val[0], x * x * y + 3 * x - y ** 3)
    assert np.allclose(jet.grad[0], [2 * x * y + 3, x * x - 3 * y * y])
    assert np.allclose(jet.hess[0], [[2 * y, 2 * x], [2 * x, -6 * y]])


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_transcendental_against_fd(a, b):
    def f(u):
        x, y = u
        return (x.sin() * y.cos() + (x * x + y * y + 1.0).sqrt()) / (2.0 + x.cos())

    fd_check(f, [a, b])


def test_division_and_pow():
    def f(u):
        (x,) = u
        return (x ** 3 + 1.0) / (x * x + 2.0)

    fd_check(f, [0.37])


def test_smoothstep_endpoints():
    t = seed(np.array([[-0.5], [0.0], [0.5], [1.0], [1.7]]))[0]
    s = smoothstep(t)
    assert np.allclose(s.val, [0.0, 0.0, 0.5, 1.0, 1.0])
    assert np.allclose(s.grad[[0, 1, 3, 4]], 0.0)
    assert np.allclose(s.hess[[0, 1, 3, 4]], 0.0)
    assert s.grad[2, 0] > 0


def test_stack_shapes():
    u = np.random.default_rng(0).normal(size=(5, 2))
    jets = seed(u)
    x, y = jets
    q, jac, hess = stack([x * y, x + y, x.sin()])
    assert q.shape == (5, 3)
    assert jac.shape == (5, 3, 2)
    assert hess.shape == (5, 3, 2, 2)


def test_first_order_mode():
    u = np.array([[0.3, 0.4]])
    x, y = seed(u, order=1)
    j = x.sin() * y
    assert j.hess is None
    assert np.isclose(j.val[0], np.sin(0.3) * 0.4)
