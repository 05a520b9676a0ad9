"""The ODE resolvent G(X) = int_X^inf ds/f(s), its companion H and inverses.

G is tabulated on a geometric grid (64 nodes per decade).  Between nodes a
16-point Gauss-Legendre rule in log X corrects from the nearest node, so
evaluation is accurate to roughly machine precision rather than to the
accuracy of an interpolant.  Beyond the last node the improper integral is
evaluated directly after the substitution s = X v^{-1/(p-1)}, which maps
[X, inf) onto (0, 1] with the bounded integrand 1/L:

    int_X^inf ds/f(s) = X^{1-p}/(p-1) * int_0^1 dv / L(X v^{-1/(p-1)}).

The same map handles H(X) = int_X^inf (A + log f)/f ds, whose transformed
integrand has only an integrable logarithmic singularity at v = 0.

The blow-up solution of psi' = f(psi) is psi(t) = G^{-1}(T - t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq

from .nonlinearity import NonlinearitySpec, locate_M
from .quadrature import QuadratureError, gauss_legendre, integrate, integrate_panels

__all__ = [
    "QuadratureError",
    "RangeError",
    "StepUnderflowError",
    "ResolventTable",
    "build_table",
    "build_h_table",
    "default_table",
    "default_h_table",
    "G",
    "G_inv",
    "G_tail",
    "H",
    "H_inv",
    "H_closed_form_pure_power",
    "psi",
    "ginv_asymptotic",
    "AsymptoticsReport",
    "check_asymptotics",
    "OdeTrajectory",
    "ode_integrate",
]

NODES_PER_DECADE = 64
DEFAULT_QUAD_TOL = 1e-13
DEFAULT_X_HI = 1e40
_GL_ORDER = 16


class RangeError(ValueError):
    """Raised for arguments outside the domain of a table or inverse."""


class StepUnderflowError(RuntimeError):
    """Raised when an adaptive integrator's step falls below its floor."""


def _weight(spec: NonlinearitySpec, A: float | None, s: np.ndarray) -> np.ndarray:
    """Numerator of the integrand: 1 for G, A + log f for H."""
    if A is None:
        return np.ones_like(s)
    return A + spec.log_f(s)


def _log_integrand(spec: NonlinearitySpec, A: float | None):
    """Integrand in t = log s: s w(s)/f(s)."""

    def fn(t):
        s = np.exp(t)
        return _weight(spec, A, s) * np.exp(t - spec.log_f(s))

    return fn


def _tail(spec: NonlinearitySpec, A: float | None, X: float, rtol: float) -> tuple[float, float]:
    """int_X^inf w/f ds via the substitution s = X v^{-beta}; returns (value, relative error)."""
    p = spec.p
    beta = 1.0 / (p - 1.0)
    logX = math.log(X)

    def fn(v):
        log_s = np.minimum(logX - beta * np.log(v), 690.0)
        s = np.exp(log_s)
        L = spec.L_derivs(s)[0]
        if A is None:
            return 1.0 / L
        return (A + p * log_s + np.log(L)) / L

    val, err = integrate(fn, 0.0, 1.0, rtol=rtol, positive=True)
    pref = beta * math.exp((1.0 - p) * logX)
    return pref * val, err / abs(val)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResolventTable:
    """Tabulated G (``A is None``) or H (``A`` given) on a geometric grid.

    ``G_vals`` holds the tabulated integral whichever function is
    represented.  ``tail`` records the asymptotic tail model
    c * X^{1-p}/((p-1) L(X)) with the correction factor c fitted at X_hi,
    and ``continuity_error`` is the largest relative mismatch between the
    accumulated table and independent tail evaluations at interior nodes.
    """

    spec: NonlinearitySpec
    X_grid: np.ndarray
    G_vals: np.ndarray
    err_est: np.ndarray
    quad_tol: float
    A: float | None = None
    tail: dict[str, float] = field(default_factory=dict)
    continuity_error: float = 0.0

    @property
    def X_lo(self) -> float:
        return float(self.X_grid[0])

    @property
    def X_hi(self) -> float:
        return float(self.X_grid[-1])

    @property
    def kind(self) -> str:
        return "G" if self.A is None else "H"

    # -- evaluation ------------------------------------------------------

    def _integrand(self):
        return _log_integrand(self.spec, self.A)

    def __call__(self, X):
        return _evaluate(self, X)

    def inverse(self, Y):
        return _invert(self, Y)

    def derivative(self, X) -> np.ndarray:
        """Exact derivative: -1/f for G, -(A + log f)/f for H."""
        X = np.asarray(X, dtype=float)
        return -_weight(self.spec, self.A, X) * np.exp(-self.spec.log_f(X))

    def tail_model(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        p = self.spec.p
        L = self.spec.L_derivs(X)[0]
        base = X ** (1.0 - p) / ((p - 1.0) * L)
        if self.A is not None:
            base = base * (self.A + p * np.log(X) + p / (p - 1.0) + np.log(L))
        return self.tail["c_hi"] * base

    def to_rows(self) -> list[tuple[float, float, float]]:
        return [(float(x), float(g), float(e)) for x, g, e in zip(self.X_grid, self.G_vals, self.err_est)]

    def summary(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "family": self.spec.name,
            "p": self.spec.p,
            "A": self.A,
            "X_lo": self.X_lo,
            "X_hi": self.X_hi,
            "nodes": int(self.X_grid.size),
            "nodes_per_decade": NODES_PER_DECADE,
            "quad_tol": self.quad_tol,
            "max_rel_error_estimate": float(self.err_est.max()),
            "continuity_error": self.continuity_error,
            "tail": dict(self.tail),
        }


def _build(spec, A, X_lo, X_hi, quad_tol) -> ResolventTable:
    if not (1e-14 < quad_tol < 1e-6):
        raise ValueError(f"quad_tol must lie in (1e-14, 1e-6) (got {quad_tol:g})")
    if X_lo < spec.s_min or not X_lo > 0:
        raise RangeError(f"X_lo = {X_lo:.6g} is below s_min = {spec.s_min:.6g}")
    if not X_hi >= 10.0 * X_lo:
        raise RangeError("X_hi must be at least 10 X_lo")
    decades = math.log10(X_hi / X_lo)
    n_cells = max(1, int(math.ceil(decades * NODES_PER_DECADE)))
    t_edges = np.linspace(math.log(X_lo), math.log(X_hi), n_cells + 1)
    X_grid = np.exp(t_edges)
    X_grid[0], X_grid[-1] = X_lo, X_hi
    t_edges = np.log(X_grid)
    fn = _log_integrand(spec, A)
    cells, cell_err = integrate_panels(fn, t_edges, rtol=0.1 * quad_tol, positive=True)
    tail_val, tail_rel = _tail(spec, A, X_hi, 0.1 * quad_tol)
    # G_i = tail + sum_{j >= i} cell_j, accumulated from the right.
    acc = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    acc_err = np.concatenate([np.cumsum(cell_err[::-1])[::-1], [0.0]])
    vals = tail_val + acc
    err = (tail_rel * tail_val + acc_err) / vals
    if not (np.all(vals > 0) and np.all(np.diff(vals) < 0)):
        raise QuadratureError("tabulated values are not positive and strictly decreasing")
    p = spec.p
    L_hi = float(spec.L_derivs(np.array(X_hi))[0])
    model = X_hi ** (1.0 - p) / ((p - 1.0) * L_hi)
    if A is not None:
        model *= A + p * math.log(X_hi) + p / (p - 1.0) + math.log(L_hi)
    tail = {"p": p, "X_hi": X_hi, "L_hi": L_hi, "c_hi": float(vals[-1] / model)}
    # Independent check of the accumulation: direct tail integrals at a few nodes.
    cont = 0.0
    for idx in sorted({0, n_cells // 2, n_cells - 1}):
        direct, _ = _tail(spec, A, float(X_grid[idx]), 0.1 * quad_tol)
        cont = max(cont, abs(direct / vals[idx] - 1.0))
    return ResolventTable(
        spec=spec,
        X_grid=X_grid,
        G_vals=vals,
        err_est=err,
        quad_tol=quad_tol,
        A=None if A is None else float(A),
        tail=tail,
        continuity_error=float(cont),
    )


def build_table(
    spec: NonlinearitySpec,
    X_lo: float | None = None,
    X_hi: float = DEFAULT_X_HI,
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> ResolventTable:
    """Tabulate G on [X_lo, X_hi]; X_lo defaults to max(s_min, 1)."""
    if X_lo is None:
        X_lo = max(spec.s_min, 1.0)
    return _build(spec, None, float(X_lo), float(X_hi), quad_tol)


def build_h_table(
    spec: NonlinearitySpec,
    A: float,
    X_lo: float | None = None,
    X_hi: float = DEFAULT_X_HI,
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> ResolventTable:
    """Tabulate H for the constant A on [X_lo, X_hi]; X_lo defaults to the M gate."""
    if A < 0:
        raise ValueError("A must be nonnegative")
    if X_lo is None:
        X_lo = locate_M(spec)
    return _build(spec, float(A), float(X_lo), float(X_hi), quad_tol)


@lru_cache(maxsize=64)
def default_table(spec: NonlinearitySpec, quad_tol: float = DEFAULT_QUAD_TOL) -> ResolventTable:
    """Cached G table over the default range."""
    return build_table(spec, quad_tol=quad_tol)


@lru_cache(maxsize=64)
def default_h_table(spec: NonlinearitySpec, A: float, quad_tol: float = DEFAULT_QUAD_TOL) -> ResolventTable:
    """Cached H table over [M, 1e40] for the constant A."""
    return build_h_table(spec, A, quad_tol=quad_tol)


def _cell_correction(table: ResolventTable, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """int_{X_idx}^{X} integrand, with 16-point Gauss-Legendre in log X."""
    xi, wi = gauss_legendre(_GL_ORDER)
    t0 = np.log(table.X_grid[idx])
    t1 = np.log(X)
    half = 0.5 * (t1 - t0)
    nodes = t0[:, None] + half[:, None] * (xi[None, :] + 1.0)
    vals = table._integrand()(nodes)
    return half * (vals @ wi)


def _evaluate(table: ResolventTable, X):
    arr = np.asarray(X, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if np.any(~np.isfinite(flat)) or np.any(flat < table.X_lo * (1.0 - 1e-14)):
        raise RangeError(f"argument below table range X_lo = {table.X_lo:.6g}")
    flat = np.maximum(flat, table.X_lo)
    out = np.empty_like(flat)
    inside = flat <= table.X_hi
    if np.any(inside):
        xs = flat[inside]
        idx = np.clip(np.searchsorted(table.X_grid, xs, side="right") - 1, 0, table.X_grid.size - 2)
        out[inside] = table.G_vals[idx] - _cell_correction(table, xs, idx)
    for k in np.flatnonzero(~inside):
        out[k] = _tail(table.spec, table.A, float(flat[k]), 0.1 * table.quad_tol)[0]
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def _newton_inside(table: ResolventTable, Y: np.ndarray) -> np.ndarray:
    """Bracketed Newton in t = log X for targets inside the tabulated range."""
    Gv = table.G_vals
    # Gv is decreasing; locate j with Gv[j] >= Y >= Gv[j+1].
    j = np.clip(np.searchsorted(-Gv, -Y, side="left") - 1, 0, Gv.size - 2)
    tg = np.log(table.X_grid)
    lo, hi = tg[j].copy(), tg[j + 1].copy()
    lg0, lg1 = np.log(Gv[j]), np.log(Gv[j + 1])
    w = np.where(lg1 != lg0, (np.log(Y) - lg0) / (lg1 - lg0), 0.5)
    t = lo + np.clip(w, 0.0, 1.0) * (hi - lo)
    active = np.ones(Y.shape, dtype=bool)
    for _ in range(60):
        ta = t[active]
        X = np.exp(ta)
        ja = np.clip(np.searchsorted(table.X_grid, X, side="right") - 1, 0, Gv.size - 2)
        g = Gv[ja] - _cell_correction(table, X, ja) - Y[active]
        la, ha = lo[active], hi[active]
        la = np.where(g > 0, ta, la)
        ha = np.where(g < 0, ta, ha)
        d = X * table.derivative(X)  # dG/dt
        tn = ta - g / d
        bad = ~np.isfinite(tn) | (tn <= la) | (tn >= ha)
        tn = np.where(bad, 0.5 * (la + ha), tn)
        tn = np.where(g == 0, ta, tn)
        step = np.abs(tn - ta)
        lo[active], hi[active], t[active] = la, ha, tn
        done = (step <= 4e-16 * np.maximum(1.0, np.abs(tn))) | (ha - la <= 4e-16 * np.maximum(1.0, np.abs(tn)))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not np.any(active):
            break
    return np.exp(t)


def _newton_beyond(table: ResolventTable, y: float) -> float:
    """Inverse for targets below G(X_hi), using direct tail evaluations."""
    spec, A = table.spec, table.A
    p = spec.p
    beta = 1.0 / (p - 1.0)
    tol = 0.1 * table.quad_tol

    def gval(t):
        return _tail(spec, A, math.exp(t), tol)[0]

    lo = math.log(table.X_hi)
    # Asymptotic guess from the pure-power part of the tail model.
    t = lo + beta * math.log(table.G_vals[-1] / y)
    hi = t
    while gval(hi) > y:
        lo = hi
        hi += 2.0 * (hi - math.log(table.X_hi)) + 1.0
        if hi > 690.0:
            raise RangeError("inverse exceeds the floating-point range")
    t = min(max(t, lo), hi)
    for _ in range(80):
        g = gval(t) - y
        if g > 0:
            lo = t
        elif g < 0:
            hi = t
        else:
            break
        X = math.exp(t)
        d = X * float(table.derivative(X))
        tn = t - g / d
        if not (lo < tn < hi) or not math.isfinite(tn):
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 4e-16 * max(1.0, abs(tn)):
            t = tn
            break
        t = tn
    return math.exp(t)


def _invert(table: ResolventTable, Y):
    arr = np.asarray(Y, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    top = table.G_vals[0]
    if np.any(~np.isfinite(flat)) or np.any(flat <= 0) or np.any(flat > top * (1.0 + 1e-14)):
        raise RangeError(f"argument outside (0, {top:.6g}]")
    flat = np.minimum(flat, top)
    out = np.empty_like(flat)
    inside = flat >= table.G_vals[-1]
    if np.any(inside):
        out[inside] = _newton_inside(table, flat[inside])
    for k in np.flatnonzero(~inside):
        out[k] = _newton_beyond(table, float(flat[k]))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Functional API
# ---------------------------------------------------------------------------


def G(table: ResolventTable, X):
    """G(X) for X >= X_lo (direct tail quadrature beyond X_hi)."""
    if table.A is not None:
        raise TypeError("table represents H, not G")
    return _evaluate(table, X)


def G_inv(table: ResolventTable, Y):
    """Inverse of G for Y in (0, G(X_lo)]."""
    if table.A is not None:
        raise TypeError("table represents H, not G")
    return _invert(table, Y)


def G_tail(spec: NonlinearitySpec, X: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """G(X) by a single transformed quadrature, without a table."""
    if X < spec.s_min or not X > 0:
        raise RangeError(f"X = {X:.6g} is below s_min")
    return _tail(spec, None, float(X), 0.1 * quad_tol)[0]


def H(spec: NonlinearitySpec, A: float, X, quad_tol: float = DEFAULT_QUAD_TOL):
    """H(X) = int_X^inf (A + log f)/f ds by transformed quadrature.

    Defined for every X >= s_min; H is only monotone where A + log f > 0,
    which the inverse enforces through its domain.
    """
    if A < 0:
        raise ValueError("A must be nonnegative")
    arr = np.asarray(X, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if np.any(~np.isfinite(flat)) or np.any(flat < spec.s_min) or np.any(flat <= 0):
        raise RangeError(f"X must be finite and at least s_min = {spec.s_min:.6g}")
    out = np.array([_tail(spec, float(A), float(x), 0.1 * quad_tol)[0] for x in flat])
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def H_inv(spec: NonlinearitySpec, A: float, Y, quad_tol: float = DEFAULT_QUAD_TOL):
    """Inverse of H on the gate domain [M, inf)."""
    table = default_h_table(spec, float(A), quad_tol)
    return _invert(table, Y)


def H_closed_form_pure_power(p: float, A: float, X):
    """X^{1-p}/(p-1) (A + p log X + p/(p-1)), valid for f = s^p."""
    X = np.asarray(X, dtype=float)
    return X ** (1.0 - p) / (p - 1.0) * (A + p * np.log(X) + p / (p - 1.0))


def psi(table: ResolventTable, T: float, t):
    """Blow-up solution psi(t) = G^{-1}(T - t)."""
    tau = T - np.asarray(t, dtype=float)
    if np.any(tau <= 0):
        raise RangeError("psi is only defined for t < T")
    if np.any(tau > table.G_vals[0] * (1.0 + 1e-14)):
        raise RangeError("T - t exceeds G(X_lo)")
    return G_inv(table, tau)


def ginv_asymptotic(spec: NonlinearitySpec, s):
    """kappa s^{-beta} L^{-beta}(s^{-beta}) with beta = 1/(p-1), kappa = beta^beta."""
    beta = 1.0 / (spec.p - 1.0)
    kappa = beta**beta
    s = np.asarray(s, dtype=float)
    z = s ** (-beta)
    L = spec.L_derivs(z)[0]
    return kappa * z * L ** (-beta)


# ---------------------------------------------------------------------------
# Asymptotic equivalences
# ---------------------------------------------------------------------------


@dataclass
class AsymptoticsReport:
    """Ratio series along an X ladder and trend verdicts."""

    family: str
    p: float
    A: float
    X_ladder: list[float]
    series: dict[str, list[float]] = field(default_factory=dict)
    verdicts: dict[str, bool] = field(default_factory=dict)
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def as_dict(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "p": self.p,
            "A": self.A,
            "X_ladder": list(self.X_ladder),
            "series": {k: list(v) for k, v in self.series.items()},
            "verdicts": dict(self.verdicts),
            "notes": dict(self.notes),
            "passed": self.passed,
        }


def _trend_ok(ratios: Sequence[float], threshold: float) -> bool:
    dev = np.abs(np.asarray(ratios, dtype=float) - 1.0)
    if not np.all(np.isfinite(dev)):
        return False
    return bool(dev[-1] < threshold and (dev[-1] < dev[0] or dev[0] < 1e-9))


def _dam_point(table: ResolventTable, p: float, X: float) -> float:
    """Y with (p-1) Y/(p |log Y|) = G(X)."""
    g = float(G(table, X))

    def fn(u):  # u = log Y < -1, increasing branch
        return (p - 1.0) * math.exp(u) / (p * abs(u)) - g

    lo, hi = -1.0, -2.0
    while fn(hi) > 0:
        hi *= 2.0
    return math.exp(brentq(fn, hi, lo, xtol=1e-15, rtol=1e-15))


def check_asymptotics(
    spec: NonlinearitySpec,
    X_ladder: Sequence[float] | None = None,
    A: float = 0.0,
    eps_list: Sequence[float] = (0.5, 0.25, 0.1, 0.01),
    threshold: float = 0.1,
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> AsymptoticsReport:
    """Evaluate the asymptotic ratio series for G, H and their inverses.

    The ``dam`` entry compares H_inv(Y) with X where Y solves
    (p-1) Y/(p |log Y|) = G(X), i.e. it is the ratio
    H_inv(Y)/G_inv((p-1)Y/(p|log Y|)) parametrised by X.
    """
    if X_ladder is None:
        X_ladder = [math.exp(k) for k in range(10, 61, 5)]
    X = np.asarray(X_ladder, dtype=float)
    p = spec.p
    table = default_table(spec, quad_tol)
    htable = default_h_table(spec, float(A), quad_tol)
    if X.min() < max(table.X_lo, htable.X_lo) or X.max() > table.X_hi:
        raise RangeError("ladder must lie inside the table range")
    L, L1, _ = spec.L_derivs(X)
    Gx = np.asarray(G(table, X))
    Hx = np.asarray(htable(X))
    logX = np.log(X)
    rep = AsymptoticsReport(family=spec.name, p=p, A=float(A), X_ladder=[float(x) for x in X])
    ch = Gx * (p - 1.0) * X ** (p - 1.0) * L
    ch1 = Hx * (p - 1.0) * X ** (p - 1.0) * L / (p * logX)
    ch2 = Hx / (p / (p - 1.0) * Gx * np.abs(np.log(Gx)))
    dam = []
    for x in X:
        y = _dam_point(table, p, float(x))
        dam.append(float(htable.inverse(y)) / float(x))
    lm1b = np.abs(Gx * ((p - 1.0) * X ** (p - 1.0) * L + X**p * L1) - 1.0) * logX
    equiv = np.asarray(G(table, X * (1.0 + 1.0 / logX))) / Gx
    rep.series.update(
        ch=ch.tolist(), ch1=ch1.tolist(), ch2=ch2.tolist(), dam=dam, lm1b=lm1b.tolist(), equivGG=equiv.tolist()
    )
    for key in ("ch", "ch1", "ch2", "dam", "equivGG"):
        rep.verdicts[key] = _trend_ok(rep.series[key], threshold)
    top = lm1b[(len(lm1b) + 1) // 2 :]
    rep.verdicts["lm1b"] = bool(np.all(np.diff(top) < 0) or np.all(top < 1e-8))
    # Perturbation inequalities in epsilon.
    f_X = spec.f(X)
    worst1 = math.inf
    c1 = 0.0
    for eps in eps_list:
        r1 = spec.f((1.0 - eps) * X) / ((1.0 - eps) ** (p + 1.0) * f_X)
        worst1 = min(worst1, float(np.min(r1)))
        r2 = np.asarray(G(table, (1.0 - eps) * X)) / Gx
        c1 = max(c1, float(np.max((r2 - 1.0) / eps)))
        rep.series[f"ell12a1_eps{eps:g}"] = r1.tolist()
        rep.series[f"ell12a2_eps{eps:g}"] = r2.tolist()
    rep.verdicts["ell12a1"] = worst1 >= 1.0
    rep.verdicts["ell12a2"] = math.isfinite(c1)
    rep.notes["C1_fitted"] = c1
    rep.notes["ell12a1_min_ratio"] = worst1
    # Crossover below which the (ch2) equivalence is off by more than the threshold.
    dev2 = np.abs(ch2 - 1.0)
    above = np.flatnonzero(dev2 > threshold)
    rep.notes["ch2_crossover_X"] = float(X[above[-1]]) if above.size else None
    rep.notes["top_deviation"] = {k: float(abs(rep.series[k][-1] - 1.0)) for k in ("ch", "ch1", "ch2", "dam", "equivGG")}
    return rep


# ---------------------------------------------------------------------------
# ODE blow-up solution
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass(frozen=True)
class OdeTrajectory:
    """Samples of the ODE solution and the implied blow-up time."""

    t: np.ndarray
    psi: np.ndarray
    T_hat: float
    max_deviation: float
    steps: int
    rejected: int
    deviation_all: float = float("nan")


def ode_integrate(
    spec: NonlinearitySpec,
    psi0: float,
    stop_value: float = 1e12,
    rtol: float = 1e-12,
    safety: float = 0.25,
    dt_min: float = 1e-300,
    max_steps: int = 2_000_000,
    table: ResolventTable | None = None,
    check_floor: float = 1e-6,
) -> OdeTrajectory:
    """Integrate psi' = f(psi) from psi0 until psi >= stop_value.

    Dormand-Prince 5(4) with relative error control and the extra cap
    dt f'(psi) <= safety.  The blow-up time is T = t_end + G(psi(t_end)).

    The cross-check against G_inv(T - t) is restricted to samples with
    T - t >= check_floor * T: an absolute error d in the time coordinate
    perturbs G_inv(T - t) by d/((p-1)(T - t)) relative, so samples closer
    to the blow-up time only measure floating-point time resolution.
    ``deviation_all`` reports the unrestricted maximum for reference.
    """
    if psi0 < spec.s_min or not psi0 > 0:
        raise RangeError("psi0 must be positive and at least s_min")
    if stop_value > 1e280 or stop_value <= psi0:
        raise RangeError("stop_value must exceed psi0 and be at most 1e280")
    if table is None:
        table = default_table(spec)

    def rhs(y):
        return float(spec.f(y))

    def fp(y):
        return float(spec.f_derivs(np.array(y))[1])

    t, y = 0.0, float(psi0)
    ts, ys = [t], [y]
    k1 = rhs(y)
    dt = min(1e-3 * y / k1, safety / max(fp(y), 1e-300))
    steps = rejected = 0
    while y < stop_value:
        if steps + rejected > max_steps:
            raise StepUnderflowError("step budget exhausted before reaching stop_value")
        dt = min(dt, safety / max(fp(y), 1e-300))
        if dt < dt_min:
            raise StepUnderflowError(f"step {dt:.3g} fell below dt_min before reaching stop_value")
        k = [k1]
        for i in range(1, 7):
            yi = y + dt * sum(a * kk for a, kk in zip(_DP_A[i], k))
            if not yi > 0 or not math.isfinite(yi):
                k = None
                break
            k.append(rhs(yi))
        if k is None:
            dt *= 0.25
            rejected += 1
            continue
        y_new = y + dt * float(np.dot(_DP_B[:6], k[:6]))
        err = abs(dt * float(np.dot(_DP_E, k))) / (rtol * max(abs(y), abs(y_new)))
        if err <= 1.0 and math.isfinite(y_new):
            t += dt
            y = y_new
            k1 = k[6]
            ts.append(t)
            ys.append(y)
            steps += 1
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** (-0.2))
        else:
            rejected += 1
            fac = max(0.1, 0.9 * err ** (-0.2)) if math.isfinite(err) else 0.1
        dt *= fac
    tt = np.asarray(ts)
    yy = np.asarray(ys)
    T_hat = float(tt[-1] + G(table, yy[-1]))
    tau = T_hat - tt
    inside = (tau > 0) & (tau <= table.G_vals[0])
    dev_all = np.abs(yy[inside] / G_inv(table, tau[inside]) - 1.0)
    ok = tau[inside] >= check_floor * T_hat
    dev = float(np.max(dev_all[ok])) if np.any(ok) else 0.0
    return OdeTrajectory(
        t=tt,
        psi=yy,
        T_hat=T_hat,
        max_deviation=dev,
        steps=steps,
        rejected=rejected,
        deviation_all=float(np.max(dev_all)) if dev_all.size else 0.0,
    )
