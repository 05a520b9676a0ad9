"""The fourteen acceptance criteria as executable checks.

Each ``criterion_<k>`` returns a :class:`CriterionResult`.  Expensive inputs
(reference PDE runs, frame series) live in a shared :class:`ReferenceContext`
that computes them lazily and at most once, so the pytest suite and the
``verify`` command can call criteria in any order or concurrently.
"""
from __future__ import annotations

import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .nonlinearity import NonlinearitySpec, catalogue, locate_M
from .pde_solver import (
    BlowupEstimate,
    GridSpec,
    PlateauGaussian,
    RunConfig,
    RunRecord,
    SolutionState,
    fit_A,
    j_monitor,
    ode_comparison,
    solve,
)
from .profiles import ProfilePrediction, Window, global_trend, verify_against_run
from .resolvent import (
    G,
    G_inv,
    H,
    H_closed_form_pure_power,
    H_inv,
    check_asymptotics,
    default_h_table,
    default_table,
    ode_integrate,
)
from .similarity import (
    HermiteBasis,
    PolyGaussTrial,
    lower_decay_check,
    neutral_mode_track,
    poincare_check,
    project,
    select_frames,
    synthetic_frame,
    theorem1_residual,
)

__all__ = [
    "CriterionResult",
    "ReferenceContext",
    "CRITERIA",
    "run_criterion",
    "run_all",
    "thread_count",
]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f} s)"

    def as_dict(self) -> dict[str, Any]:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "seconds": self.seconds,
            "budget_seconds": self.budget,
            "details": self.details,
        }


def _monotone_defect(state: SolutionState) -> float:
    return float(np.max(np.diff(state.u))) / max(state.m, 1e-300)


class ReferenceContext:
    """Lazily computed reference runs and frame series shared by the criteria."""

    def __init__(self, seed: int = 20240601, samples: int = 1000):
        self.seed = seed
        self.samples = samples
        self._cache: dict[str, Any] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _get(self, key: str, build: Callable[[], Any]) -> Any:
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._cache:
                t0 = time.perf_counter()
                self._cache[key] = build()
                self._cache[key + ":seconds"] = time.perf_counter() - t0
            return self._cache[key]

    def seconds(self, key: str) -> float:
        return float(self._cache.get(key + ":seconds", 0.0))

    @staticmethod
    def reference_config(n: int, doubled: bool = False) -> RunConfig:
        grid = GridSpec().doubled() if doubled else GridSpec()
        return RunConfig(NonlinearitySpec(2.0), n=n, initial=PlateauGaussian(amplitude=20.0), grid=grid, U_max=1e12)

    def reference_run(self, n: int = 1, doubled: bool = False) -> RunRecord:
        key = f"run-n{n}{'-doubled' if doubled else ''}"
        return self._get(key, lambda: solve(self.reference_config(n, doubled), run_id=key))

    def ode_limit_run(self) -> RunRecord:
        cfg = RunConfig(
            NonlinearitySpec(2.0),
            n=1,
            initial=PlateauGaussian(amplitude=1.0, width=0.2, plateau=2.0),
            grid=GridSpec(nodes=40, grading=1.0, core_nodes=10),
            diffusion=False,
            U_max=1e10,
        )
        return self._get("run-ode-limit", lambda: solve(cfg, run_id="ode-limit"))

    def basis(self, n: int = 1) -> HermiteBasis:
        return self._get(f"basis-{n}", lambda: HermiteBasis(n))

    def frames(self, n: int = 1):
        return self._get(f"frames-{n}", lambda: select_frames(self.reference_run(n)))

    def fitted_A(self, n: int = 1) -> dict:
        return self._get(f"A-{n}", lambda: fit_A(self.reference_run(n)))


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def criterion_1(ctx: ReferenceContext) -> CriterionResult:
    rng = np.random.default_rng(ctx.seed)
    worst_g = 0.0
    worst_h = 0.0
    for p in (2.0, 3.0):
        spec = NonlinearitySpec(p)
        table = default_table(spec)
        X = 10.0 ** rng.uniform(1.0, 8.0, ctx.samples)
        worst_g = max(worst_g, float(np.max(np.abs(np.asarray(G(table, X)) * (p - 1) * X ** (p - 1) - 1.0))))
        for A in (0.0, 3.0):
            Xh = np.exp(rng.uniform(1.0, math.log(1e8), ctx.samples // 4))
            got = np.asarray(H(spec, A, Xh))
            want = H_closed_form_pure_power(p, A, Xh)
            worst_h = max(worst_h, float(np.max(np.abs(got / want - 1.0))))
    return CriterionResult(
        1,
        "resolvent oracle (pure power)",
        worst_g < 1e-10 and worst_h < 1e-9,
        {"max_G_deviation": worst_g, "max_H_relative_error": worst_h},
        budget=10.0,
    )


def criterion_2(ctx: ReferenceContext) -> CriterionResult:
    rng = np.random.default_rng(ctx.seed + 1)
    out = {}
    ok = True
    A = 1.0
    for spec in catalogue(2.0):
        table = default_table(spec)
        X = np.exp(rng.uniform(math.log(table.X_lo), math.log(table.X_hi), ctx.samples))
        g_err = float(np.max(np.abs(np.asarray(G_inv(table, G(table, X))) / X - 1.0)))
        htab = default_h_table(spec, A)
        Xh = np.exp(rng.uniform(math.log(htab.X_lo), math.log(htab.X_hi), ctx.samples))
        h_err = float(np.max(np.abs(np.asarray(H_inv(spec, A, H(spec, A, Xh))) / Xh - 1.0)))
        out[spec.name] = {"G_roundtrip": g_err, "H_roundtrip": h_err}
        ok &= g_err < 1e-9 and h_err < 1e-9
    return CriterionResult(2, "G and H round trips (catalogue)", ok, out, budget=30.0)


def criterion_3(ctx: ReferenceContext) -> CriterionResult:
    out = {}
    ok = True
    needed = ("ch", "ch1", "ch2", "dam", "lm1b")
    for spec in catalogue(2.0):
        rep = check_asymptotics(spec)
        verdicts = {k: bool(rep.verdicts[k]) for k in needed}
        top = {k: float(rep.series[k][-1]) for k in ("ch", "ch1", "ch2", "dam")}
        out[spec.name] = {"verdicts": verdicts, "ratio_at_top": top}
        ok &= all(verdicts.values())
    return CriterionResult(3, "asymptotic equivalence trends", ok, out, budget=120.0)


def criterion_4(ctx: ReferenceContext) -> CriterionResult:
    out = {}
    ok = True
    for p in (2.0, 3.0):
        spec = NonlinearitySpec(p)
        tr = ode_integrate(spec, 1.0)
        exact = float(G(default_table(spec), 1.0))
        err = abs(tr.T_hat / exact - 1.0)
        out[f"pure_power_p{p:g}_T_error"] = err
        ok &= err < 1e-8
    for spec in catalogue(2.0):
        tr = ode_integrate(spec, max(10.0, spec.s_min))
        out[f"{spec.name}_deviation"] = tr.max_deviation
        ok &= tr.max_deviation < 1e-6
    return CriterionResult(4, "ODE blow-up time and trajectory", ok, out, budget=30.0)


def criterion_5(ctx: ReferenceContext) -> CriterionResult:
    out = {}
    ok = True
    for n in (1, 3):
        rec = ctx.reference_run(n)
        d: dict[str, Any] = {"status": rec.status, "steps": rec.stats.get("steps")}
        if rec.status != "blow-up" or rec.estimate is None:
            out[f"n{n}"] = d
            ok = False
            continue
        comp = float(np.max(ode_comparison(rec)))
        mono = max(_monotone_defect(s) for s in rec.snapshots)
        rel = rec.estimate.spread / rec.estimate.T_hat
        d.update({"max_m_over_Psi": comp, "max_monotone_defect": mono, "T_hat": rec.estimate.T_hat, "spread": rec.estimate.spread, "spread_over_T": rel})
        ok &= comp <= 1.0 + 1e-5 and mono <= 1e-10 and rel < 1e-3
        out[f"n{n}"] = d
    fine = ctx.reference_run(1, doubled=True)
    base = ctx.reference_run(1)
    if fine.estimate is not None and base.estimate is not None:
        shift = abs(fine.estimate.T_hat - base.estimate.T_hat)
        out["grid_doubling"] = {
            "T_hat_fine": fine.estimate.T_hat,
            "shift": shift,
            "three_spread": 3 * base.estimate.spread,
            "relative_shift": shift / base.estimate.T_hat,
        }
        ok &= shift < 3 * base.estimate.spread
    else:
        ok = False
    secs = sum(ctx.seconds(k) for k in ("run-n1", "run-n3", "run-n1-doubled"))
    out["run_seconds"] = secs
    return CriterionResult(5, "reference PDE runs", ok and secs < 600, out, budget=600.0)


def criterion_6(ctx: ReferenceContext) -> CriterionResult:
    rec = ctx.ode_limit_run()
    spec = rec.config.spec
    tr = ode_integrate(spec, 1.0, stop_value=1e10)
    # Level-crossing times: t(log psi) from the ODE samples, with the exact slope psi / f(psi).
    interp = CubicHermiteSpline(np.log(tr.psi), tr.t, tr.psi / spec.f(tr.psi))
    m = rec.m_hist
    sel = (m <= 1e10) & (m >= tr.psi[0])
    dev = np.abs(rec.t_hist[sel] - interp(np.log(m[sel]))) / tr.T_hat
    T_err = abs(rec.estimate.T_hat - 1.0) if rec.estimate else math.inf
    worst = float(np.max(dev))
    return CriterionResult(
        6,
        "ODE limit of the solver",
        rec.status == "blow-up" and worst < 1e-6 and T_err < 1e-6,
        {"max_time_deviation": worst, "T_hat_error": T_err, "final_m": rec.stats["final_m"], "steps": rec.stats["steps"]},
        budget=60.0,
    )


def criterion_7(ctx: ReferenceContext) -> CriterionResult:
    rec = ctx.reference_run(1)
    fit = ctx.fitted_A(1)
    snaps = rec.snapshots[-max(1, len(rec.snapshots) // 3):]
    pos = 0
    total = 0
    for s in snaps:
        J, _ = j_monitor(s, fit["A"], fit["M_gate"], spec=rec.config.spec)
        mon = ~np.isnan(J)
        total += int(mon.sum())
        pos += int(np.sum(J[mon] > 0))
    frac = pos / total
    return CriterionResult(7, "J-functional sign", frac < 0.01, {"positive_fraction": frac, "monitored_nodes": total, **fit})


def criterion_8(ctx: ReferenceContext) -> CriterionResult:
    rec = ctx.reference_run(1)
    fit = ctx.fitted_A(1)
    T = rec.estimate.T_hat
    pred = ProfilePrediction("upper_h", rec.config.spec, A=fit["A"])
    win = Window(t_min=0.5 * T, annulus=False, x_max=0.5 * rec.config.R, u_min=fit["M_gate"])
    rep = verify_against_run(rec, [pred], win, tolerance=1e-3)[0]
    return CriterionResult(8, "upper profile bound via H", rep.violation_fraction < 0.01, rep.as_dict())


def criterion_9(ctx: ReferenceContext) -> CriterionResult:
    out: dict[str, Any] = {}
    ok = True
    worst_c = 0.0
    for n in range(1, 6):
        b = HermiteBasis(n)
        c0 = (4 * math.pi) ** (-n / 4)
        c2 = (8 * n) ** -0.5 * c0
        worst_c = max(worst_c, abs(b.c0 - c0), abs(b.c2 - c2))
    out["hermite_constant_error"] = worst_c
    ok &= worst_c < 1e-10
    worst_py = 0.0
    for n in (1, 3):
        for f in ctx.frames(n):
            worst_py = max(worst_py, project(f, ctx.basis(n), check=False).pythagoras_defect)
    out["pythagoras_defect"] = worst_py
    ok &= worst_py < 1e-8
    trivial = 0.0
    for n in (1, 3):
        b = ctx.basis(n)
        c = project(synthetic_frame(b, 10.0, 2.0, lambda y: b.H2(y)), b)
        trivial = max(trivial, abs(c.a), abs(c.b - 1), c.theta_norm)
        c = project(synthetic_frame(b, 10.0, 2.0, lambda y: np.ones_like(y)), b)
        trivial = max(trivial, abs(c.a - float(np.sum(b.weights)) ** 0.5), abs(c.b), c.theta_norm)
        for s in (5.0, 20.0):
            c = project(synthetic_frame(b, s, 2.0, lambda y: (y * y - 2 * n) / (8.0 * s)), b)
            trivial = max(trivial, abs(s * c.b * 8.0 * b.c2 - 1.0))
    out["trivial_projection_error"] = trivial
    ok &= trivial < 1e-10
    return CriterionResult(9, "Hermite basis and projections", ok, out, budget=60.0)


def criterion_10(ctx: ReferenceContext) -> CriterionResult:
    rng = np.random.default_rng(ctx.seed + 10)
    worst = {"moment": math.inf, "mean": math.inf, "two_mode": math.inf, "hessian": math.inf}
    counts = dict.fromkeys(worst, 0)
    for n in (1, 2, 3):
        b = HermiteBasis(n)
        for k in range(200):
            if k % 2 == 0:
                coeffs = np.zeros(7)
                coeffs[::2] = rng.normal(size=4)  # smooth radial: polynomial in |y|^2
            else:
                coeffs = rng.normal(size=7)
            margins = poincare_check(PolyGaussTrial(tuple(coeffs)), b)
            for key, val in margins.items():
                if val is not None:
                    worst[key] = min(worst[key], val)
                    counts[key] += 1
    ok = all(v >= -1e-10 for v in worst.values()) and min(counts.values()) >= 100
    return CriterionResult(10, "weighted Poincare inequalities", ok, {"min_margin": worst, "trials": counts}, budget=60.0)


def criterion_11(ctx: ReferenceContext) -> CriterionResult:
    frames = ctx.frames(1)
    b = ctx.basis(1)
    track = neutral_mode_track(frames, b)
    third = track.coefficients[-max(1, len(frames) // 3):]
    a_ok = all(abs(c.a) < abs(c.b) for c in third)
    th_ok = all(c.theta_norm < abs(c.b) for c in third)
    ok = track.final_gap < 0.25 and track.shrinking and a_ok and th_ok
    return CriterionResult(
        11,
        "neutral mode decay",
        ok,
        {
            "final_sb": float(track.sb[-1]),
            "target": track.target,
            "final_gap": track.final_gap,
            "shrinking": track.shrinking,
            "a_below_b": a_ok,
            "theta_below_b": th_ok,
            "frames": len(frames),
            "s_range": [float(track.s[0]), float(track.s[-1])],
        },
    )


def criterion_12(ctx: ReferenceContext) -> CriterionResult:
    frames = ctx.frames(1)[-5:]
    b = ctx.basis(1)
    sup = [theorem1_residual(f, 2.0, b)[0] for f in frames]
    ok = len(sup) == 5 and bool(np.all(np.diff(sup) < 0))
    return CriterionResult(12, "refined rate residual", ok, {"s": [f.s for f in frames], "residual": sup})


def _synthetic_profile_record(p: float) -> tuple[RunRecord, float]:
    """Record whose snapshots equal the pure-power global profile exactly."""
    spec = NonlinearitySpec(p)
    T = 0.05
    beta = 1.0 / (p - 1.0)
    r = np.concatenate([[0.0], np.geomspace(1e-6, 0.5, 400)])
    snaps = []
    for tau in np.geomspace(5e-2, 1e-6, 25):
        with np.errstate(divide="ignore"):
            space = np.where(r > 0, (p - 1.0) / (8.0 * p) * r**2 / np.abs(np.log(np.where(r > 0, r, 0.5))), 0.0)
        u = ((p - 1.0) * (tau + space)) ** (-beta)
        snaps.append(SolutionState(t=T - tau, r=r, u=u, dt=0.0, dt_next=0.0))
    cfg = RunConfig(spec, n=1)
    t = np.array([s.t for s in snaps])
    m = np.array([s.m for s in snaps])
    est = BlowupEstimate(T_hat=T, t_k=t, series=t + 0.0, spread=0.0, n_last=4)
    rec = RunRecord(cfg, tuple(snaps), t, m, "blow-up", est, {}, "synthetic")
    return rec, T


def criterion_13(ctx: ReferenceContext) -> CriterionResult:
    rec = ctx.reference_run(1)
    pred = ProfilePrediction("global", rec.config.spec, T_hat=rec.estimate.T_hat)
    trend = global_trend(rec, pred)
    worst = 0.0
    for p in (2.0, 3.0):
        srec, T = _synthetic_profile_record(p)
        pr = ProfilePrediction("global", srec.config.spec, T_hat=T)
        rep = verify_against_run(srec, [pr], Window(annulus=False, x_max=0.5))[0]
        worst = max(worst, abs(rep.ratio_min - 1.0), abs(rep.ratio_max - 1.0))
    ok = trend["monotone"] and worst < 1e-9
    return CriterionResult(13, "global profile", ok, {"trend": trend, "synthetic_ratio_error": worst})


def criterion_14(ctx: ReferenceContext) -> CriterionResult:
    res = lower_decay_check(ctx.frames(1), ctx.basis(1))
    half = len(res.s) // 2
    return CriterionResult(
        14,
        "polynomial lower bound on the decay",
        res.passed,
        {"lower_bound": res.lower_bound, "decay_rate": res.decay_rate, "series": res.s_phi_norm[half:].tolist()},
    )


CRITERIA: dict[int, Callable[[ReferenceContext], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
    13: criterion_13,
    14: criterion_14,
}


def run_criterion(number: int, ctx: ReferenceContext) -> CriterionResult:
    """Run one criterion, timing it and checking its runtime budget.

    Time spent building shared reference runs is charged to criterion 5
    (whose budget covers them), not to the criterion that happened to
    trigger the build.
    """
    before = {k: v for k, v in ctx._cache.items() if k.endswith(":seconds")}
    t0 = time.perf_counter()
    try:
        res = CRITERIA[number](ctx)
    except Exception as exc:  # a crashing criterion is a failing criterion
        res = CriterionResult(number, CRITERIA[number].__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
    elapsed = time.perf_counter() - t0
    shared = sum(v for k, v in ctx._cache.items() if k.endswith(":seconds") and k not in before and k.startswith("run-"))
    res.seconds = elapsed if number == 5 else max(elapsed - shared, 0.0)
    if res.budget is not None and res.seconds > res.budget:
        res.passed = False
        res.details["over_budget"] = True
    return res


def thread_count() -> int:
    """Worker threads for criterion groups, from BLOWUP_LAB_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("BLOWUP_LAB_THREADS", "1")))
    except ValueError:
        return 1


def run_all(numbers=None, ctx: ReferenceContext | None = None, threads: int | None = None) -> list[CriterionResult]:
    """Run the selected criteria (all by default), concurrently when threads > 1."""
    ctx = ctx or ReferenceContext()
    numbers = sorted(numbers or CRITERIA)
    threads = threads or thread_count()
    if threads == 1:
        return [run_criterion(k, ctx) for k in numbers]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda k: run_criterion(k, ctx), numbers))
