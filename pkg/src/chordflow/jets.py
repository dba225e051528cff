"""Second-order forward-mode jets.

Every chart map in this package is written as a composition of the primitives
below, so immersion values, Jacobians and Hessians are exact to rounding.
A ``Jet`` carries one scalar quantity per batch point together with its
gradient and (optionally) Hessian with respect to the chart coordinates.

Shapes: ``val (...,)``, ``grad (..., m)``, ``hess (..., m, m)`` where ``m`` is
the number of chart coordinates and ``...`` is an arbitrary batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Jet:
    val: np.ndarray
    grad: np.ndarray
    hess: np.ndarray | None  # None in first-order mode

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            h = None if self.hess is None else self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, h)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            val = self.val * other.val
            grad = self.grad * other.val[..., None] + other.grad * self.val[..., None]
            h = None
            if self.hess is not None:
                cross = self.grad[..., :, None] * other.grad[..., None, :]
                h = (
                    self.hess * other.val[..., None, None]
                    + other.hess * self.val[..., None, None]
                    + cross
                    + np.swapaxes(cross, -1, -2)
                )
            return Jet(val, grad, h)
        c = np.asarray(other)
        return Jet(
            self.val * c,
            self.grad * c[..., None] if c.ndim else self.grad * c,
            None
            if self.hess is None
            else (self.hess * c[..., None, None] if c.ndim else self.hess * c),
        )

    __rmul__ = __mul__

    def inv(self):
        iv = 1.0 / self.val
        grad = -self.grad * (iv * iv)[..., None]
        h = None
        if self.hess is not None:
            gg = self.grad[..., :, None] * self.grad[..., None, :]
            h = (2.0 * gg * iv[..., None, None] - self.hess) * (iv * iv)[..., None, None]
        return Jet(iv, grad, h)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.inv()
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.inv() * other

    # -- elementary functions -----------------------------------------------

    def _chain(self, f, fp, fpp):
        val = f(self.val)
        grad = self.grad * fp(self.val)[..., None]
        h = None
        if self.hess is not None:
            gg = self.grad[..., :, None] * self.grad[..., None, :]
            h = self.hess * fp(self.val)[..., None, None] + gg * fpp(self.val)[..., None, None]
        return Jet(val, grad, h)

    def sin(self):
        return self._chain(np.sin, np.cos, lambda v: -np.sin(v))

    def cos(self):
        return self._chain(np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))

    def sqrt(self):
        return self._chain(np.sqrt, lambda v: 0.5 / np.sqrt(v), lambda v: -0.25 / np.sqrt(v) ** 3)

    def exp(self):
        return self._chain(np.exp, np.exp, np.exp)

    def __pow__(self, k: int):
        if k == 0:
            return Jet(np.ones_like(self.val), np.zeros_like(self.grad),
                       None if self.hess is None else np.zeros_like(self.hess))
        out = self
        for _ in range(k - 1):
            out = out * self
        return out


def seed(u: np.ndarray, order: int = 2) -> list[Jet]:
    """Coordinate jets for chart points ``u`` of shape ``(..., m)``."""
    u = np.asarray(u, dtype=float)
    m = u.shape[-1]
    batch = u.shape[:-1]
    jets = []
    for i in range(m):
        grad = np.zeros(batch + (m,))
        grad[..., i] = 1.0
        hess = None if order == 1 else np.zeros(batch + (m, m))
        jets.append(Jet(u[..., i].copy(), grad, hess))
    return jets


def const(value, like: Jet) -> Jet:
    v = np.full(like.val.shape, float(value)) if np.ndim(value) == 0 \
        else np.broadcast_to(np.asarray(value, dtype=float), like.val.shape).copy()
    g = np.zeros_like(like.grad)
    h = None if like.hess is None else np.zeros_like(like.hess)
    return Jet(v, g, h)


def zero(like: Jet) -> Jet:
    """A shared zero jet; treat as immutable (all jet ops allocate)."""
    return Jet(np.zeros(like.val.shape), np.zeros_like(like.grad),
               None if like.hess is None else np.zeros_like(like.hess))


def stack(components: list[Jet]):
    """Assemble scalar jets into (value, jacobian, hessian) arrays.

    Returns ``q (..., n)``, ``jac (..., n, m)`` and ``hess (..., n, m, m)``
    (hess is None in first-order mode).
    """
    val = np.stack([c.val for c in components], axis=-1)
    jac = np.stack([c.grad for c in components], axis=-2)
    if components[0].hess is None:
        return val, jac, None
    hess = np.stack([c.hess for c in components], axis=-3)
    return val, jac, hess


def dot(a: list[Jet], b: list[Jet]) -> Jet:
    out = a[0] * b[0]
    for x, y in zip(a[1:], b[1:]):
        out = out + x * y
    return out


def norm2(a: list[Jet]) -> Jet:
    return dot(a, a)


def smoothstep(t: Jet) -> Jet:
    """Quintic smoothstep: 0 for t<=0 and 1 for t>=1 with C^2 joins."""
    tc = Jet(np.clip(t.val, 0.0, 1.0), t.grad.copy(), None if t.hess is None else t.hess.copy())
    inside = (t.val > 0.0) & (t.val < 1.0)
    mask = inside.astype(float)
    tc = Jet(tc.val, tc.grad * mask[..., None],
             None if tc.hess is None else tc.hess * mask[..., None, None])
    s = tc * tc * tc * (tc * (tc * 6.0 - 15.0) + 10.0)
    return s
