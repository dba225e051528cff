"""Dense linear algebra over Z/2 on uint8 numpy arrays."""

from __future__ import annotations

import numpy as np


def as_mod2(a) -> np.ndarray:
    return (np.asarray(a, dtype=np.int64) % 2).astype(np.uint8)


def rank(a) -> int:
    return len(_eliminate(as_mod2(a))[1])


def rref(a) -> tuple[np.ndarray, list[int]]:
    return _eliminate(as_mod2(a))


def _eliminate(m: np.ndarray) -> tuple[np.ndarray, list[int]]:
    m = m.copy()
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        pivot = None
        for rr in range(r, rows):
            if m[rr, c]:
                pivot = rr
                break
        if pivot is None:
            continue
        m[[r, pivot]] = m[[pivot, r]]
        for rr in range(rows):
            if rr != r and m[rr, c]:
                m[rr] ^= m[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def kernel_basis(a) -> np.ndarray:
    """Basis of {x : a x = 0}, rows are basis vectors."""
    a = as_mod2(a)
    if a.size == 0:
        return np.eye(a.shape[1], dtype=np.uint8)
    red, pivots = _eliminate(a)
    cols = a.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for r, p in enumerate(pivots):
            if red[r, f]:
                v[p] = 1
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def solve(a, b) -> np.ndarray | None:
    """One solution x of a x = b over Z/2, or None if inconsistent."""
    a = as_mod2(a)
    b = as_mod2(b).reshape(-1)
    aug = np.concatenate([a, b[:, None]], axis=1)
    red, pivots = _eliminate(aug)
    cols = a.shape[1]
    if cols in pivots:
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for r, p in enumerate(pivots):
        x[p] = red[r, cols]
    return x if not (a @ x % 2 ^ b).any() else None


def in_span(rows, v) -> bool:
    """Whether v lies in the row span of ``rows``."""
    rows = as_mod2(rows)
    if rows.size == 0:
        return not as_mod2(v).any()
    return solve(rows.T, v) is not None
