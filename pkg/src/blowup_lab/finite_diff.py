"""Finite-difference first derivatives of even radial functions on nonuniform grids."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["fornberg_weights", "radial_derivative_operator", "radial_derivative"]


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights c[j, k] such that d^k u/dx^k (z) ~ sum_j c[j, k] u(x_j).

    Fornberg's recursion; ``x`` may be arbitrarily spaced.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@lru_cache(maxsize=32)
def _operator(key: bytes, size: int):
    r = np.frombuffer(key, dtype=float, count=size)
    n = r.size
    idx = np.zeros((n, 5), dtype=int)
    w = np.zeros((n, 5))
    for i in range(n):
        if i == 0:
            # u_r(0) = 0 for an even function.
            continue
        if i < 2:
            # Mirror the stencil across r = 0 using u(-r) = u(r).
            cols = np.array([i - 2, i - 1, i, i + 1, i + 2])
            pts = np.where(cols < 0, -r[np.abs(cols)], r[np.abs(cols)])
            idx[i] = np.abs(cols)
        elif i > n - 3:
            cols = np.arange(n - 5, n)
            pts = r[cols]
            idx[i] = cols
        else:
            cols = np.arange(i - 2, i + 3)
            pts = r[cols]
            idx[i] = cols
        w[i] = fornberg_weights(r[i], pts, 1)[:, 1]
    return idx, w


def radial_derivative_operator(r: np.ndarray):
    """(indices, weights) of 5-point fourth-order stencils for u_r on ``r``."""
    r = np.ascontiguousarray(r, dtype=float)
    if r.size < 5:
        raise ValueError("need at least five nodes")
    return _operator(r.tobytes(), r.size)


def radial_derivative(r: np.ndarray, u: np.ndarray) -> np.ndarray:
    """u_r of an even radial function sampled at nodes r_0 = 0 < r_1 < ..."""
    idx, w = radial_derivative_operator(r)
    return np.sum(w * np.asarray(u, dtype=float)[idx], axis=1)
