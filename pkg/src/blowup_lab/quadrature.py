"""Vectorised adaptive Gauss-Kronrod quadrature.

Two entry points are provided.  :func:`integrate_panels` integrates over a
fixed partition and refines each panel independently until a local relative
tolerance is met, returning one value per panel.  :func:`integrate` refines a
single interval adaptively against a global tolerance, which is what the
improper tails need (integrable endpoint singularities get many bisections,
smooth parts none).

Both use the classical 7-point Gauss / 15-point Kronrod pair and the raw
difference |K15 - G7| as error estimate, which is pessimistic for smooth
integrands.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["QuadratureError", "gk15", "integrate_panels", "integrate", "gauss_legendre"]

# Kronrod abscissae (nonnegative half, descending) and weights.
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
# Gauss weights for the abscissae _XGK[1], _XGK[3], _XGK[5], _XGK[7].
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
# Gauss nodes sit at odd positions of the descending half (indices 1, 3, 5) and the centre.
for _k, _w in zip((1, 3, 5), _WG[:3]):
    _WG15[_k] = _w
    _WG15[14 - _k] = _w
_WG15[7] = _WG[3]


class QuadratureError(RuntimeError):
    """Raised when an adaptive rule cannot reach its tolerance."""


def gk15(func: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray):
    """Kronrod estimate and |K15 - G7| on each panel [a_i, b_i]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * _NODES[None, :]
    y = np.asarray(func(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    K = h * (y @ _WK)
    G = h * (y @ _WG15)
    return K, np.abs(K - G), y


def _check_values(y: np.ndarray, positive: bool) -> None:
    if not np.all(np.isfinite(y)):
        raise QuadratureError("integrand returned non-finite values")
    if positive and np.any(y <= 0):
        raise QuadratureError("integrand nonpositivity detected")


def integrate_panels(
    func: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    rtol: float,
    max_depth: int = 40,
    positive: bool = False,
):
    """Integrate over every panel of ``edges`` to a local relative tolerance.

    Returns ``(values, errors)``, one entry per panel.
    """
    edges = np.asarray(edges, dtype=float)
    owner = np.arange(edges.size - 1)
    a, b = edges[:-1].copy(), edges[1:].copy()
    values = np.zeros(edges.size - 1)
    errors = np.zeros(edges.size - 1)
    # Per-panel tolerance is relative to the parent panel's first estimate.
    scale = None
    for depth in range(max_depth + 1):
        K, E, y = gk15(func, a, b)
        _check_values(y, positive)
        if scale is None:
            scale = np.abs(K).copy()
        frac = (b - a) / (edges[owner + 1] - edges[owner])
        ok = E <= rtol * np.maximum(scale[owner] * frac, 1e-300)
        np.add.at(values, owner[ok], K[ok])
        np.add.at(errors, owner[ok], E[ok])
        if np.all(ok):
            return values, errors
        bad = ~ok
        m = 0.5 * (a[bad] + b[bad])
        a = np.concatenate([a[bad], m])
        b = np.concatenate([m, b[bad]])
        owner = np.concatenate([owner[bad], owner[bad]])
    raise QuadratureError(f"panel quadrature did not reach rtol={rtol:g} within depth {max_depth}")


def integrate(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float,
    atol: float = 0.0,
    initial: int = 8,
    max_iter: int = 80,
    max_panels: int = 20000,
    positive: bool = False,
):
    """Globally adaptive integral of ``func`` over [a, b].

    Returns ``(value, error_estimate)``.  Panels whose error exceeds their
    length-proportional share of the tolerance are bisected, as is the worst
    panel, until the summed error estimate meets max(atol, rtol |I|).
    """
    edges = np.linspace(a, b, initial + 1)
    pa, pb = edges[:-1], edges[1:]
    K, E, y = gk15(func, pa, pb)
    _check_values(y, positive)
    width = b - a
    for _ in range(max_iter):
        total = K.sum()
        err = E.sum()
        tol = max(atol, rtol * abs(total))
        if err <= tol:
            return float(total), float(err)
        share = tol * (pb - pa) / width
        bad = E > share
        bad[np.argmax(E)] = True
        if pa.size + bad.sum() > max_panels:
            break
        m = 0.5 * (pa[bad] + pb[bad])
        na = np.concatenate([pa[bad], m])
        nb = np.concatenate([m, pb[bad]])
        nK, nE, ny = gk15(func, na, nb)
        _check_values(ny, positive)
        keep = ~bad
        pa = np.concatenate([pa[keep], na])
        pb = np.concatenate([pb[keep], nb])
        K = np.concatenate([K[keep], nK])
        E = np.concatenate([E[keep], nE])
    raise QuadratureError(
        f"adaptive quadrature did not converge: estimate {E.sum():.3g} vs tolerance {rtol:g}"
    )


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (cached)."""
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]
