"""Predicted blow-up profiles and their comparison with radial runs.

All global formulas are built from the building block

    B(x, t) = (T - t) + (p - 1)/(8p) |x|^2 / |log |x||,

fed to G_inv.  The equivalent form with |log |x|^2| and coefficient
(p - 1)/(4p) is the same quantity, because |log |x|^2| = 2 |log |x||; this
module always uses the |log |x|| form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .nonlinearity import NonlinearitySpec, locate_M
from .resolvent import G_inv, H, H_inv, ResolventTable, default_table, ginv_asymptotic

__all__ = [
    "PROFILE_KINDS",
    "building_block",
    "global_profile",
    "final_profile",
    "spacetime_profile",
    "explicit_profile",
    "upper_H_profile",
    "ProfilePrediction",
    "Window",
    "ComparisonReport",
    "verify_against_run",
    "global_trend",
]

PROFILE_KINDS = ("global", "final", "spacetime", "explicit", "upper_h", "final_upper_h")


def _check_p(table: ResolventTable, p: float) -> None:
    if not math.isclose(table.spec.p, p, rel_tol=0, abs_tol=1e-15):
        raise ValueError(f"p = {p} does not match the table exponent {table.spec.p}")


def building_block(p: float, T: float, x, t):
    """(T - t) + (p - 1)/(8p) |x|^2 / |log |x||, with the space term 0 at x = 0.

    Requires |x| < 1 and t <= T.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    tau = T - np.asarray(t, dtype=float)
    if np.any(ax >= 1.0):
        raise ValueError("|x| must be below 1 so that log|x| < 0")
    if np.any(tau < 0):
        raise ValueError("t must not exceed T")
    with np.errstate(divide="ignore", invalid="ignore"):
        space = np.where(ax > 0, (p - 1.0) / (8.0 * p) * ax * ax / np.abs(np.log(np.where(ax > 0, ax, 0.5))), 0.0)
    return tau + space


def _ginv_checked(table: ResolventTable, B):
    B = np.asarray(B, dtype=float)
    if np.any(B <= 0):
        raise ValueError("building block must be positive (x = 0 at t = T is the blow-up point)")
    if np.any(B > table.G_vals[0]):
        raise ValueError(f"argument exceeds G(X_lo) = {table.G_vals[0]:.6g}: outside the inversion range")
    out = G_inv(table, B)
    return float(out) if np.ndim(out) == 0 else out


def global_profile(table: ResolventTable, p: float, T: float, x, t):
    """G_inv(T - t + (p - 1)/(8p) |x|^2 / |log |x||)."""
    _check_p(table, p)
    return _ginv_checked(table, building_block(p, T, x, t))


def final_profile(table: ResolventTable, p: float, x):
    """G_inv((p - 1)|x|^2 / (8p |log |x||)), the global profile at t = T."""
    ax = np.abs(np.asarray(x, dtype=float))
    if np.any(ax <= 0):
        raise ValueError("the final profile needs 0 < |x| < 1")
    return global_profile(table, p, 0.0, x, 0.0)


def spacetime_profile(table: ResolventTable, p: float, xi, t: float, T: float, K: float | None = None):
    """G_inv((T - t)(1 + (p - 1)|xi|^2 / (4p))) with xi = x / sqrt((T - t)|log(T - t)|)."""
    _check_p(table, p)
    if not t < T:
        raise ValueError("t must be below T")
    xi = np.asarray(xi, dtype=float)
    if K is not None and np.any(np.abs(xi) > K):
        raise ValueError(f"|xi| exceeds the bound K = {K:g}")
    return _ginv_checked(table, (T - t) * (1.0 + (p - 1.0) * xi * xi / (4.0 * p)))


def explicit_profile(spec: NonlinearitySpec, p: float, x, t, T: float):
    """kappa B^(-beta) L(B^(-beta))^(-beta) with beta = 1/(p - 1), kappa = beta^beta."""
    if not math.isclose(spec.p, p, rel_tol=0, abs_tol=1e-15):
        raise ValueError(f"p = {p} does not match the nonlinearity exponent {spec.p}")
    B = np.asarray(building_block(p, T, x, t), dtype=float)
    if np.any(B <= 0):
        raise ValueError("building block must be positive")
    out = ginv_asymptotic(spec, B)
    return float(out) if np.ndim(out) == 0 else out


def upper_H_profile(spec: NonlinearitySpec, A: float, m0: float, x):
    """H_inv(H(m0) + |x|^2 / 4); m0 = inf gives the final-time bound H_inv(|x|^2 / 4)."""
    ax = np.asarray(np.abs(x), dtype=float)
    if math.isinf(m0):
        if np.any(ax <= 0):
            raise ValueError("the final-time bound needs x != 0")
        base = 0.0
    else:
        base = float(H(spec, A, m0))
    arg = base + 0.25 * ax * ax
    out = np.asarray(H_inv(spec, A, arg), dtype=float)
    if not math.isinf(m0):
        out = np.where(ax == 0, m0, out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class ProfilePrediction:
    """A profile formula bound to its parameters.

    ``kind`` is one of PROFILE_KINDS.  H-variants need ``A``; the others
    need ``T_hat``.  Domain restrictions are listed in ``domain``.
    """

    kind: str
    spec: NonlinearitySpec
    T_hat: float = math.nan
    A: float | None = None
    table: ResolventTable | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind in ("upper_h", "final_upper_h") and self.A is None:
            raise ValueError("H-variants need A")
        if self.table is None:
            object.__setattr__(self, "table", default_table(self.spec))

    @property
    def p(self) -> float:
        return self.spec.p

    @property
    def domain(self) -> str:
        return {
            "global": "0 <= |x| < 1, t <= T",
            "final": "0 < |x| < 1",
            "spacetime": "t < T, xi = x / sqrt((T-t)|log(T-t)|)",
            "explicit": "0 <= |x| < 1, t <= T",
            "upper_h": "u(0,t) >= M, |x| <= rho",
            "final_upper_h": "0 < |x| <= rho",
        }[self.kind]

    def evaluate(self, x: np.ndarray, t: float, m0: float | None = None) -> np.ndarray:
        """Prediction at radii ``x`` and time ``t`` (``m0`` = u(0, t) for upper_h)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "global":
            return np.asarray(global_profile(self.table, self.p, self.T_hat, x, t))
        if self.kind == "final":
            return np.asarray(final_profile(self.table, self.p, x))
        if self.kind == "spacetime":
            tau = self.T_hat - t
            xi = x / math.sqrt(tau * abs(math.log(tau)))
            return np.asarray(spacetime_profile(self.table, self.p, xi, t, self.T_hat))
        if self.kind == "explicit":
            return np.asarray(explicit_profile(self.spec, self.p, x, t, self.T_hat))
        if self.kind == "upper_h":
            if m0 is None:
                raise ValueError("upper_h needs m0 = u(0, t)")
            return np.asarray(upper_H_profile(self.spec, self.A, m0, x))
        return np.asarray(upper_H_profile(self.spec, self.A, math.inf, x))


@dataclass(frozen=True)
class Window:
    """Space-time window of a comparison.

    Times: snapshots with tau = T_hat - t in [tau_min, tau_max] and
    t >= t_min.  Space: the annulus 2 tau <= |x|^2 <= tau |log tau| K^2
    when ``annulus`` is set, intersected with |x| <= x_max; H-variants also
    require u >= u_min.
    """

    tau_min: float = 0.0
    tau_max: float = math.inf
    t_min: float = 0.0
    annulus: bool = True
    K: float = 2.0
    x_max: float = math.inf
    u_min: float = 0.0

    def as_dict(self) -> dict[str, Any]:
        return {
            "tau_min": self.tau_min,
            "tau_max": self.tau_max,
            "t_min": self.t_min,
            "annulus": self.annulus,
            "K": self.K,
            "x_max": self.x_max,
            "u_min": self.u_min,
        }


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Ratio statistics of u / prediction over a window."""

    kind: str
    window: dict
    n_points: int
    n_snapshots: int
    ratio_min: float
    ratio_max: float
    ratio_median: float
    violation_fraction: float | None = None
    trend: dict | None = None
    verdict: bool | None = None
    rows: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "window": self.window,
            "n_points": self.n_points,
            "n_snapshots": self.n_snapshots,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "ratio_median": self.ratio_median,
            "violation_fraction": self.violation_fraction,
            "trend": self.trend,
            "verdict": self.verdict,
        }


def _window_points(record, pred: ProfilePrediction, window: Window):
    """Rows (x, t, u, prediction) collected from all snapshots inside the window."""
    rows = []
    used = 0
    T = record.estimate.T_hat if record.estimate is not None else pred.T_hat
    for snap in record.snapshots:
        tau = T - snap.t
        if not (tau > 0 and window.tau_min <= tau <= window.tau_max and snap.t >= window.t_min):
            continue
        r, u = snap.r, snap.u
        sel = (r <= window.x_max) & (r < 1.0 if pred.kind in ("global", "final", "explicit") else True)
        if window.annulus:
            sel &= (r * r >= 2 * tau) & (r * r <= tau * abs(math.log(tau)) * window.K**2)
        if pred.kind in ("upper_h", "final_upper_h"):
            sel &= u >= window.u_min
            if pred.kind == "final_upper_h":
                sel &= r > 0
        if pred.kind == "final":
            sel &= r > 0
        if not np.any(sel):
            continue
        used += 1
        pv = pred.evaluate(r[sel], snap.t, m0=float(u[0]))
        rows.append(np.column_stack([r[sel], np.full(int(sel.sum()), snap.t), u[sel], pv]))
    if not rows:
        return np.empty((0, 4)), 0
    return np.vstack(rows), used


def verify_against_run(
    record,
    predictions: Sequence[ProfilePrediction],
    window: Window | None = None,
    tolerance: float = 1e-3,
    keep_rows: bool = False,
) -> list[ComparisonReport]:
    """Compare a run with each prediction over ``window``.

    For the H-variants the report carries the fraction of points where u
    exceeds the bound by more than the relative ``tolerance``.
    """
    window = window or Window()
    reports = []
    for pred in predictions:
        rows, used = _window_points(record, pred, window)
        if rows.shape[0] == 0:
            raise ValueError(f"empty comparison window for {pred.kind}")
        ratio = rows[:, 2] / rows[:, 3]
        viol = None
        verdict = None
        if pred.kind in ("upper_h", "final_upper_h"):
            viol = float(np.mean(rows[:, 2] > rows[:, 3] * (1.0 + tolerance)))
            verdict = viol < 0.01
        reports.append(
            ComparisonReport(
                kind=pred.kind,
                window=window.as_dict(),
                n_points=int(rows.shape[0]),
                n_snapshots=used,
                ratio_min=float(ratio.min()),
                ratio_max=float(ratio.max()),
                ratio_median=float(np.median(ratio)),
                violation_fraction=viol,
                verdict=verdict,
                rows=np.column_stack([rows, ratio]) if keep_rows else None,
            )
        )
    return reports


def global_trend(record, pred: ProfilePrediction, exponents: Sequence[int] = (2, 3, 4, 5), K: float = 2.0) -> dict[str, Any]:
    """Median u / prediction over the windows tau in [10^-k, 10^-(k-1)].

    The verdict holds when |median - 1| decreases strictly from one
    exponent to the next.
    """
    medians = []
    counts = []
    for k in exponents:
        win = Window(tau_min=10.0 ** (-k), tau_max=10.0 ** (-(k - 1)), annulus=True, K=K)
        rep = verify_against_run(record, [pred], win)[0]
        medians.append(rep.ratio_median)
        counts.append(rep.n_points)
    dev = np.abs(np.asarray(medians) - 1.0)
    return {
        "exponents": list(exponents),
        "medians": medians,
        "deviations": dev.tolist(),
        "points": counts,
        "monotone": bool(np.all(np.diff(dev) < 0)),
    }
