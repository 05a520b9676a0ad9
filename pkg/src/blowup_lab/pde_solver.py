"""Radial solver for u_t = Laplacian(u) + f(u) on a ball, run toward blow-up.

Space: node-centred finite volumes on a graded grid (uniform core of width
``core_nodes`` spacings near r = 0, then geometric growth to R).  The
conservative discrete Laplacian is an M-matrix, with the symmetry condition
at r = 0 built into the first control volume and a Dirichlet node at R.

Time: IMEX Euler (implicit diffusion, explicit reaction) with step doubling.
The difference between one full step and two half steps estimates the local
error; the accepted state is the Richardson combination 2*half - full.  The
step is additionally capped by dt * max f'(u) <= safety, halved when the
candidate loses positivity or radial monotonicity, and falls back to the
two-half-step Euler value when halving alone does not restore them.
"""
from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .finite_diff import radial_derivative
from .nonlinearity import NonlinearitySpec, locate_M, sobolev_exponent
from .resolvent import G, G_inv, ResolventTable, StepUnderflowError, build_table, default_table

__all__ = [
    "SolverError",
    "InitialDataError",
    "InsufficientHistoryError",
    "StepUnderflowError",
    "Ball",
    "WholeSpace",
    "PlateauGaussian",
    "Tabulated",
    "GridSpec",
    "RunConfig",
    "SolutionState",
    "BlowupEstimate",
    "RunRecord",
    "build_grid",
    "init_state",
    "step",
    "solve",
    "estimate_T",
    "ode_comparison",
    "j_monitor",
    "fit_A",
]


class SolverError(RuntimeError):
    """Raised for unrecoverable solver failures."""


class InitialDataError(ValueError):
    """Raised when initial data violate the admissibility conditions."""


class InsufficientHistoryError(ValueError):
    """Raised when the m-history is too short to estimate the blow-up time."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Dirichlet ball of radius R."""

    R: float = 1.0
    key = "ball"


@dataclass(frozen=True)
class WholeSpace:
    """Whole space, approximated by a Dirichlet ball of radius R_effective."""

    R_effective: float = 8.0
    key = "whole_space"

    @property
    def R(self) -> float:
        return self.R_effective


@dataclass(frozen=True)
class PlateauGaussian:
    """u0(r) = amplitude * exp(-max(r - plateau, 0)^2 / width^2)."""

    amplitude: float = 20.0
    width: float = 0.2
    plateau: float = 0.4
    key = "plateau_gaussian"

    def sample(self, r: np.ndarray) -> np.ndarray:
        d = np.maximum(r - self.plateau, 0.0)
        return self.amplitude * np.exp(-((d / self.width) ** 2))


@dataclass(frozen=True)
class Tabulated:
    """Radial profile given at points r_tab, interpolated monotonically."""

    r_tab: tuple[float, ...]
    u_tab: tuple[float, ...]
    key = "tabulated"

    def sample(self, r: np.ndarray) -> np.ndarray:
        rt = np.asarray(self.r_tab, dtype=float)
        ut = np.asarray(self.u_tab, dtype=float)
        if rt.size < 2 or rt.size != ut.size or np.any(np.diff(rt) <= 0):
            raise InitialDataError("tabulated data need >= 2 strictly increasing abscissae")
        if np.any(np.diff(ut) > 0):
            raise InitialDataError("tabulated data are not radially nonincreasing")
        if np.any(ut < 0):
            raise InitialDataError("tabulated data are negative")
        out = PchipInterpolator(rt, ut, extrapolate=False)(r)
        out = np.where(r < rt[0], ut[0], out)
        return np.where(r > rt[-1], ut[-1], out)


@dataclass(frozen=True)
class GridSpec:
    """Graded radial grid: ``nodes`` points, a uniform core, then geometric growth."""

    nodes: int = 760
    grading: float = 1.03
    core_nodes: int = 250

    def doubled(self) -> "GridSpec":
        """Twice the intervals everywhere: core doubled, ratio square-rooted."""
        return GridSpec(
            nodes=2 * (self.nodes - 1) + 1,
            grading=math.sqrt(self.grading),
            core_nodes=2 * self.core_nodes,
        )


def build_grid(grid: GridSpec, R: float) -> np.ndarray:
    """Node positions 0 = r_0 < ... < r_{N-1} = R."""
    m = grid.nodes - 1
    nc = grid.core_nodes
    if m < 5 or nc < 1 or nc >= m or grid.grading < 1.0:
        raise ValueError("grid needs nodes > core_nodes + 1 >= 2 and grading >= 1")
    k = np.arange(1, m - nc + 1)
    growth = grid.grading ** k.astype(float)
    h0 = R / (nc + growth.sum())
    h = np.concatenate([np.full(nc, h0), h0 * growth])
    r = np.concatenate([[0.0], np.cumsum(h)])
    r[-1] = R
    return r


@dataclass(frozen=True)
class RunConfig:
    """Everything that defines one radial run."""

    spec: NonlinearitySpec
    n: int = 1
    domain: Any = field(default_factory=Ball)
    initial: Any = field(default_factory=PlateauGaussian)
    grid: GridSpec = field(default_factory=GridSpec)
    safety: float = 1e-3
    rtol: float = 1e-6
    dt_min: float = 1e-24
    dt_max: float = math.inf
    dt_init: float = 1e-8
    U_max: float = 1e12
    t_max: float = 10.0
    n_snapshots: int = 48
    diffusion: bool = True
    reaction: bool = True
    max_steps: int = 5_000_000

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension n must be a positive integer")
        if not self.spec.p < sobolev_exponent(int(self.n)):
            raise ValueError("p must be below the critical exponent (n+2)/(n-2)")
        if not (0 < self.safety and 0 < self.rtol < 1 and 0 < self.dt_min):
            raise ValueError("safety, rtol and dt_min must be positive (rtol < 1)")
        if not self.U_max > 0 or self.n_snapshots < 1:
            raise ValueError("U_max must be positive and n_snapshots >= 1")

    @property
    def R(self) -> float:
        return float(self.domain.R)


@dataclass(frozen=True, eq=False)
class SolutionState:
    """Solution on the radial grid at time t."""

    t: float
    r: np.ndarray
    u: np.ndarray
    dt: float
    dt_next: float

    @property
    def m(self) -> float:
        return float(self.u[0])


@dataclass(frozen=True, eq=False)
class BlowupEstimate:
    """Blow-up time estimate from the series t_k + G(m(t_k))."""

    T_hat: float
    t_k: np.ndarray
    series: np.ndarray
    spread: float
    n_last: int


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Snapshots, m-history and blow-up estimate of one run."""

    config: RunConfig
    snapshots: tuple
    t_hist: np.ndarray
    m_hist: np.ndarray
    status: str
    estimate: BlowupEstimate | None
    stats: dict
    run_id: str


# ---------------------------------------------------------------------------
# Discrete operator
# ---------------------------------------------------------------------------


class _Operator:
    """Finite-volume radial Laplacian on the unknowns r_0 .. r_{N-2}."""

    def __init__(self, r: np.ndarray, n: int):
        self.r = r
        rf = 0.5 * (r[1:] + r[:-1])  # faces r_{i+1/2}, i = 0..N-2
        h = np.diff(r)
        c = rf ** (n - 1) / h  # flux coefficients at faces
        lower_faces = np.concatenate([[0.0], rf[:-1]])
        V = (rf**n - lower_faces**n) / n
        cm = np.concatenate([[0.0], c[:-1]])
        self.ap = c / V  # coupling to the right neighbour
        self.am = cm / V  # coupling to the left neighbour

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        ui = u[:-1]
        right = u[1:]
        left = np.concatenate([[0.0], u[:-2]])
        return self.ap * (right - ui) - self.am * (ui - left)

    def solve(self, dt: float, rhs: np.ndarray) -> np.ndarray:
        m = rhs.size
        ab = np.empty((3, m))
        ab[0, 0] = 0.0
        ab[0, 1:] = -dt * self.ap[:-1]
        ab[1] = 1.0 + dt * (self.ap + self.am)
        ab[2, :-1] = -dt * self.am[1:]
        ab[2, -1] = 0.0
        return solve_banded((1, 1), ab, rhs, overwrite_ab=True, check_finite=False)


@lru_cache(maxsize=16)
def _operator_for(n: int, R: float, grid: GridSpec) -> _Operator:
    return _Operator(build_grid(grid, R), n)


def _euler(op: _Operator, cfg: RunConfig, u: np.ndarray, dt: float) -> np.ndarray:
    """One IMEX Euler step, solved for the increment.

    (I - dt D) du = dt (D u + f(u)) is algebraically the same as
    (I - dt D) u_new = u + dt f(u), but its rounding error scales with the
    increment rather than with u, which matters once dt |D| reaches 1e8 on
    the fine core cells.
    """
    ui = u[:-1]
    rhs = np.zeros_like(ui)
    if cfg.diffusion:
        rhs += dt * op.laplacian(u)
    if cfg.reaction:
        rhs += dt * cfg.spec.f(np.maximum(ui, 0.0))
    du = op.solve(dt, rhs) if cfg.diffusion else rhs
    return np.concatenate([ui + du, [0.0]])


def _valid(u: np.ndarray) -> bool:
    m = max(float(u[0]), 0.0)
    if not np.all(np.isfinite(u)):
        return False
    if np.min(u) < -1e-12 * m:
        return False
    return bool(np.max(np.diff(u)) <= 1e-10 * m)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def init_state(config: RunConfig) -> SolutionState:
    """Sample the initial data on the grid after validating them (no repair)."""
    op = _operator_for(int(config.n), config.R, config.grid)
    r = op.r
    u = np.asarray(config.initial.sample(r), dtype=float)
    if not np.all(np.isfinite(u)):
        raise InitialDataError("initial data are not finite")
    if np.any(u < 0):
        raise InitialDataError("initial data are negative somewhere")
    scale = max(float(np.max(u)), 1e-300)
    if np.any(np.diff(u) > 1e-12 * scale):
        raise InitialDataError("initial data are not radially nonincreasing")
    if isinstance(config.domain, WholeSpace) and np.ptp(u) <= 1e-12 * scale:
        raise InitialDataError("constant initial data are excluded on the whole space")
    u = u.copy()
    u[-1] = 0.0
    return SolutionState(t=0.0, r=r, u=u, dt=0.0, dt_next=float(config.dt_init))


def _reaction_cap(config: RunConfig, u: np.ndarray) -> float:
    if not config.reaction:
        return math.inf
    fp = float(np.max(config.spec.fprime(np.maximum(u, 0.0))))
    return config.safety / fp if fp > 0 else math.inf


def step(state: SolutionState, config: RunConfig) -> SolutionState:
    """One accepted adaptive step; raises StepUnderflowError below dt_min."""
    if state.m >= config.U_max:
        raise SolverError("state already exceeds U_max")
    op = _operator_for(int(config.n), config.R, config.grid)
    u = state.u
    m = max(state.m, 1e-300)
    dt = min(state.dt_next, _reaction_cap(config, u), config.dt_max)
    invalid_tries = 0
    while True:
        if dt < config.dt_min:
            raise StepUnderflowError(f"dt = {dt:.3g} fell below dt_min = {config.dt_min:.3g}")
        full = _euler(op, config, u, dt)
        half = _euler(op, config, _euler(op, config, u, 0.5 * dt), 0.5 * dt)
        err = float(np.max(np.abs(half - full))) / m
        if not math.isfinite(err) or err > config.rtol:
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * math.sqrt(config.rtol / err))
            dt *= fac
            continue
        new = 2.0 * half - full
        if not _valid(new):
            invalid_tries += 1
            if invalid_tries <= 3:
                dt *= 0.5
                continue
            if not _valid(half):
                dt *= 0.5
                continue
            new = half
        break
    growth = 2.0 if err == 0 else min(2.0, 0.9 * math.sqrt(config.rtol / err))
    new[-1] = 0.0
    return SolutionState(t=state.t + dt, r=state.r, u=new, dt=dt, dt_next=dt * growth)


def solve(config: RunConfig, table: ResolventTable | None = None, run_id: str | None = None) -> RunRecord:
    """Step until m >= U_max, t >= t_max or dt underflow; take snapshots on schedule."""
    state = init_state(config)
    m0 = state.m
    if not m0 > 0:
        raise InitialDataError("initial data vanish identically")
    span = math.log(config.U_max / m0)
    levels = [span * (1.0 - k / config.n_snapshots) for k in range(1, config.n_snapshots + 1)]
    snaps = [state]
    t_hist = [0.0]
    m_hist = [m0]
    next_level = 0
    status = "blow-up"
    steps = 0
    leak = 0.0
    while True:
        if state.m >= config.U_max:
            status = "blow-up"
            break
        if state.t >= config.t_max:
            status = "no blow-up detected"
            break
        if steps >= config.max_steps:
            status = "step budget exhausted"
            break
        try:
            state = step(state, config)
        except StepUnderflowError:
            status = "underflow"
            break
        steps += 1
        t_hist.append(state.t)
        m_hist.append(state.m)
        if isinstance(config.domain, WholeSpace) and state.m > 0:
            leak = max(leak, float(state.u[-2]) / state.m)
        took = False
        while next_level < len(levels) and state.m > 0 and math.log(config.U_max / state.m) <= levels[next_level] + 1e-12:
            next_level += 1
            took = True
        if took:
            snaps.append(state)
    if snaps[-1] is not state:
        snaps.append(state)
    stats = {"steps": steps, "final_t": state.t, "final_m": state.m}
    if isinstance(config.domain, WholeSpace):
        stats["boundary_leak"] = leak
        stats["boundary_leak_ok"] = leak < 1e-8
    record = RunRecord(
        config=config,
        snapshots=tuple(snaps),
        t_hist=np.asarray(t_hist),
        m_hist=np.asarray(m_hist),
        status=status,
        estimate=None,
        stats=stats,
        run_id=run_id or uuid.uuid4().hex[:8],
    )
    if status == "blow-up":
        try:
            record = replace(record, estimate=estimate_T(record, table=table))
        except InsufficientHistoryError:
            pass
    return record


def _history_table(record: RunRecord, table: ResolventTable | None) -> ResolventTable:
    if table is not None:
        return table
    spec = record.config.spec
    lo = max(spec.s_min, 1.0)
    if float(np.min(record.m_hist)) < lo and spec.s_min < lo:
        lo = max(spec.s_min, float(np.min(record.m_hist[record.m_hist > 0])), 1e-6)
        return build_table(spec, X_lo=lo)
    return default_table(spec)


def estimate_T(record: RunRecord, table: ResolventTable | None = None, min_peak: float = 1e6) -> BlowupEstimate:
    """Median of t_k + G(m(t_k)) over the last quarter of the history."""
    m = np.asarray(record.m_hist)
    if m.size == 0 or float(m.max()) < min_peak:
        raise InsufficientHistoryError(f"m-history peaks below {min_peak:.3g}")
    table = _history_table(record, table)
    sel = m >= table.X_lo
    t_k = np.asarray(record.t_hist)[sel]
    m_k = m[sel]
    if t_k.size < 4:
        raise InsufficientHistoryError("fewer than four usable history points")
    series = t_k + np.asarray(G(table, m_k))
    n_last = max(4, t_k.size // 4)
    last = series[-n_last:]
    return BlowupEstimate(
        T_hat=float(np.median(last)),
        t_k=t_k,
        series=series,
        spread=float(np.ptp(last)),
        n_last=int(n_last),
    )


def ode_comparison(record: RunRecord, table: ResolventTable | None = None) -> np.ndarray:
    """m(t)/Psi(t) along the history, Psi the ODE solution from m(0).

    Psi(t) = G_inv(G(m(0)) - t); entries where Psi has already blown up
    are reported as 0.
    """
    table = _history_table(record, table)
    m = np.asarray(record.m_hist)
    t = np.asarray(record.t_hist)
    g0 = float(G(table, max(m[0], table.X_lo)))
    tau = g0 - t
    out = np.zeros_like(m)
    ok = tau > 0
    out[ok] = m[ok] / np.asarray(G_inv(table, np.minimum(tau[ok], table.G_vals[0])))
    return out


def j_monitor(state: SolutionState, A: float, M_gate: float, tol: float = 0.0, spec: NonlinearitySpec | None = None):
    """J = u_r + r f(u)/(2(A + log f(u))) on nodes with u >= M_gate and r <= R/2.

    Returns (J on all nodes with NaN off the monitored set, fraction of
    monitored nodes where J > tol).
    """
    if spec is None:
        raise ValueError("spec is required")
    r, u = state.r, state.u
    R = float(r[-1])
    mask = (u >= M_gate) & (r <= 0.5 * R)
    if not np.any(mask):
        raise ValueError("empty monitored set: no node with u >= M_gate inside r <= R/2")
    ur = radial_derivative(r, u)
    J = np.full_like(u, np.nan)
    um = u[mask]
    lf = spec.log_f(um)
    J[mask] = ur[mask] + r[mask] * np.exp(lf) / (2.0 * (A + lf))
    frac = float(np.mean(J[mask] > tol))
    return J, frac


def fit_A(record: RunRecord, M_gate: float | None = None) -> dict[str, float]:
    """The constant A = k^{-1} max{|f(u(T/2))|_inf, f(M), sup_t f(u(R/2, t))}.

    k is the largest constant with u_r <= -k r on (0, R/2] over the snapshots
    taken in [T/2, T); the supremum over t uses the same snapshots.
    """
    if record.estimate is None:
        raise ValueError("record has no blow-up estimate")
    spec = record.config.spec
    if M_gate is None:
        M_gate = locate_M(spec)
    T = record.estimate.T_hat
    late = [s for s in record.snapshots if 0.5 * T <= s.t < T]
    if not late:
        raise ValueError("no snapshots in [T/2, T)")
    mid = min(record.snapshots, key=lambda s: abs(s.t - 0.5 * T))
    k = math.inf
    sup_half = 0.0
    for s in late:
        R = float(s.r[-1])
        sel = (s.r > 0) & (s.r <= 0.5 * R)
        ur = radial_derivative(s.r, s.u)
        k = min(k, float(np.min(-ur[sel] / s.r[sel])))
        u_half = float(np.interp(0.5 * R, s.r, s.u))
        sup_half = max(sup_half, float(spec.f(u_half)))
    if not k > 0:
        raise ValueError(f"fitted k = {k:.3g} is not positive")
    f_mid = float(np.max(spec.f(np.maximum(mid.u, 0.0))))
    f_M = float(spec.f(M_gate))
    A = max(f_mid, f_M, sup_half) / k
    return {"A": A, "k": k, "f_mid": f_mid, "f_M": f_M, "sup_f_half": sup_half, "M_gate": M_gate, "t_mid": mid.t}
