"""Command-line driver: ``blowup-lab resolvent|solve|analyze|verify``.

Exit codes: 0 success, 1 failed checks (always for ``verify``, with
``--strict`` for trend verdicts elsewhere), 2 malformed configuration,
3 solver abort, 4 unresolved self-similar core.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .acceptance import ReferenceContext, run_all, thread_count
from .config import ConfigError, ExperimentConfig, load_config
from .nonlinearity import validate_hypotheses
from .pde_solver import InitialDataError, ode_comparison, solve
from .persistence import load_run, save_run, to_jsonable, write_csv, write_json
from .profiles import ProfilePrediction, Window, global_trend, verify_against_run
from .resolvent import build_h_table, build_table, check_asymptotics, default_table
from .similarity import (
    HermiteBasis,
    InsufficientFramesError,
    hermite_cubic_moment,
    h_of_s,
    lower_decay_check,
    neutral_mode_track,
    project,
    select_frames,
    synthetic_frame,
    theorem1_residual,
    uncertainty_band,
)

__all__ = ["main", "cmd_resolvent", "cmd_solve", "cmd_analyze", "cmd_verify"]

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CORE = 4

ABORT_STATUSES = ("underflow", "step budget exhausted")
ROUNDING_FLOOR = 1e-10
INTERPOLATION_FLOOR = 1e-6


def _manifest(cfg: ExperimentConfig, command: str, **extra: Any) -> dict[str, Any]:
    return {
        "command": command,
        "version": __version__,
        "config": cfg.echo(),
        "defaulted": sorted(cfg.defaulted),
        **extra,
    }


def run_id_for(cfg: ExperimentConfig) -> str:
    """Deterministic run id: a hash of the resolved nonlinearity and run sections."""
    key = json.dumps(to_jsonable({"nonlinearity": cfg.resolved["nonlinearity"], "run": cfg.resolved["run"]}), sort_keys=True)
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Plot scripts (gnuplot)
# ---------------------------------------------------------------------------


def _gnuplot(path: Path, title: str, xlabel: str, ylabel: str, plots: Sequence[str], logscale: str = "") -> None:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logscale:
        lines.append(f"set logscale {logscale}")
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_resolvent(cfg: ExperimentConfig, out: Path, strict: bool = False) -> int:
    """G table (CSV + JSON), optional H table, asymptotics and hypothesis reports."""
    spec = cfg.spec
    rs = cfg.resolvent
    out.mkdir(parents=True, exist_ok=True)
    X_lo = rs.X_lo if rs.X_lo is not None else max(spec.s_min, 1.0)
    table = build_table(spec, X_lo=X_lo, X_hi=rs.X_hi, quad_tol=rs.quad_tol)
    write_csv(out / "G_table.csv", ["X", "G", "rel_err"], table.to_rows())
    write_json(out / "G_table.json", table.summary())
    files = ["G_table.csv", "G_table.json"]
    if rs.A is not None:
        htab = build_h_table(spec, rs.A, X_hi=rs.X_hi, quad_tol=rs.quad_tol)
        write_csv(out / "H_table.csv", ["X", "H", "rel_err"], htab.to_rows())
        write_json(out / "H_table.json", htab.summary())
        files += ["H_table.csv", "H_table.json"]
    ladder = [math.exp(k) for k in np.arange(rs.ladder_start, rs.ladder_stop + 1e-9, rs.ladder_step)]
    rep = check_asymptotics(spec, ladder, A=rs.A or 0.0, threshold=rs.threshold, quad_tol=rs.quad_tol)
    write_json(out / "asymptotics.json", rep.as_dict())
    keys = sorted(rep.series)
    write_csv(out / "asymptotics.csv", ["X"] + keys, zip(rep.X_ladder, *[rep.series[k] for k in keys]))
    n = cfg.run.n if cfg.run is not None else 1
    hyp = validate_hypotheses(spec, n=n, alpha=cfg.analysis.alpha)
    write_json(out / "hypotheses.json", hyp.as_dict())
    files += ["asymptotics.json", "asymptotics.csv", "hypotheses.json"]
    soft = {k: v for k, v in rep.verdicts.items() if not v}
    write_json(out / "manifest.json", _manifest(cfg, "resolvent", files=files, failed_verdicts=sorted(soft), hypotheses_passed=hyp.passed))
    for k, v in sorted(rep.verdicts.items()):
        print(f"{k:10s} {'pass' if v else 'FAIL'}")
    if strict and (soft or not hyp.passed):
        return EXIT_CHECKS
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig, out: Path) -> tuple[int, Path | None]:
    """Run the solver and persist the run directory."""
    if cfg.run is None:
        raise ConfigError("run", cfg.run_error or "missing run section")
    try:
        record = solve(cfg.run, run_id=run_id_for(cfg))
    except InitialDataError as exc:
        raise ConfigError("run.initial", str(exc)) from None
    run_dir = save_run(record, out, config_echo=cfg.echo(), defaulted=cfg.defaulted)
    est = record.estimate
    msg = f"status: {record.status}; steps {record.stats['steps']}"
    if est is not None:
        msg += f"; T_hat = {est.T_hat:.17g} (spread {est.spread:.3g})"
    print(msg)
    print(f"run directory: {run_dir}")
    return (EXIT_SOLVER if record.status in ABORT_STATUSES else EXIT_OK), run_dir


def _analysis_from_frames(frames, basis: HermiteBasis, p: float, R_res: float) -> dict[str, Any]:
    rows = []
    residuals = []
    for f in frames:
        c = project(f, basis)
        sup, h1 = theorem1_residual(f, R_res, basis)
        rows.append(c)
        residuals.append((f.s, sup, h1, f.s * c.phi_norm, f.boundary_weight))
    return {"coeffs": rows, "residuals": residuals}


def cmd_analyze(cfg: ExperimentConfig, out: Path, run_dir: Path | None, strict: bool = False) -> int:
    """Spectral, residual and profile analysis of a run (or of synthetic frames)."""
    ana = cfg.analysis
    n = cfg.run.n if cfg.run is not None else 1
    p = cfg.spec.p
    basis = HermiteBasis(n, Y_max=ana.Y_max)
    target = 1.0 / (4.0 * p * basis.c2)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict[str, Any] = {
        "n": n,
        "p": p,
        "c0": basis.c0,
        "c2": basis.c2,
        "target_sb": target,
        "H2_cubic_moment": hermite_cubic_moment(basis),
        "basis_quality": basis.quality(),
    }
    flags: dict[str, bool] = {}
    if ana.synthetic:
        s_vals = np.arange(5.0, 21.0)
        frames = [synthetic_frame(basis, s, p, lambda y, s=s: (y * y - 2 * n) / (4 * p * s)) for s in s_vals]
        record = None
    else:
        if run_dir is None:
            code, run_dir = cmd_solve(cfg, out)
            if code != EXIT_OK:
                return code
        record = load_run(run_dir, cfg.run)
        if record.estimate is None:
            print(f"run status {record.status!r}: nothing to analyse", file=sys.stderr)
            return EXIT_SOLVER if record.status in ABORT_STATUSES else EXIT_CHECKS
        unresolved: list[int] = []
        frames = select_frames(
            record, Y_max=ana.Y_max, tau_margin=ana.tau_margin, min_core_nodes=ana.min_core_nodes, skipped=unresolved
        )
        summary["unresolved_snapshots"] = unresolved
        if not frames:
            if unresolved:
                print(f"unresolved core in {len(unresolved)} candidate snapshots; no usable frame", file=sys.stderr)
                return EXIT_CORE
            print("no snapshot qualifies as a similarity frame", file=sys.stderr)
            return EXIT_CHECKS
    res = _analysis_from_frames(frames, basis, p, ana.residual_R)
    write_csv(out / "spectral.csv", ["s", "a", "b", "theta_norm", "theta_grad_norm", "s_b", "target"], [tuple(c.as_row(target).values()) for c in res["coeffs"]])
    write_csv(out / "residuals.csv", ["s", "sup_residual", "h1_residual", "s_phi_norm", "boundary_weight"], res["residuals"])
    summary["frames"] = len(frames)
    summary["s_range"] = [frames[0].s, frames[-1].s]
    try:
        track = neutral_mode_track(frames, basis)
        summary["neutral_mode"] = {"final_sb": float(track.sb[-1]), "final_gap": track.final_gap, "shrinking": track.shrinking}
        # A gap already at rounding level (exact synthetic frames) cannot shrink further.
        flags["neutral_mode_shrinking"] = bool(track.shrinking or track.final_gap < ROUNDING_FLOOR)
        flags["neutral_mode_gap_below_0.25"] = track.final_gap < 0.25
    except InsufficientFramesError as exc:
        summary["neutral_mode"] = {"error": str(exc)}
    sup_last = np.array([r[1] for r in res["residuals"][-5:]])
    # Residuals at interpolation accuracy (synthetic frames) count as converged.
    flags["residual_decreasing_last5"] = sup_last.size == 5 and bool(np.all((np.diff(sup_last) < 0) | (sup_last[1:] < INTERPOLATION_FLOOR)))
    try:
        low = lower_decay_check(frames, basis)
        summary["lower_decay"] = {"lower_bound": low.lower_bound, "decay_rate": low.decay_rate}
        flags["lower_decay"] = low.passed
    except InsufficientFramesError as exc:
        summary["lower_decay"] = {"error": str(exc)}
    table = default_table(cfg.spec)
    s_arr = np.array([f.s for f in frames])
    s_ok = s_arr[np.exp(-s_arr) <= table.G_vals[0]]
    h = np.asarray(h_of_s(cfg.spec, table, s_ok)) if s_ok.size else np.array([])
    beta = 1.0 / (p - 1.0)
    write_csv(out / "h_of_s.csv", ["s", "h", "beta", "gap"], zip(s_ok, h, np.full(h.size, beta), np.abs(h - beta)))
    gaps = np.abs(h - beta)
    # Trend test: gap at the top of the frame ladder below the gap at its bottom.
    flags["h_gap_trend"] = bool(gaps.size >= 2 and (gaps[-1] < gaps[0] or gaps[0] < ROUNDING_FLOOR * beta))
    _gnuplot(out / "plot_sb.gp", "s b(s) against its limit", "s", "s b(s)", ["'spectral.csv' using 1:6 with linespoints", "'spectral.csv' using 1:7 with lines"])
    if record is not None:
        psi_ode = ode_comparison(record)
        with np.errstate(divide="ignore", invalid="ignore"):
            psi = np.where(psi_ode > 0, record.m_hist / psi_ode, np.nan)
        stride = max(1, record.t_hist.size // 5000)
        write_csv(out / "m_vs_psi.csv", ["t", "m", "psi"], zip(record.t_hist[::stride], record.m_hist[::stride], psi[::stride]))
        _gnuplot(out / "plot_m_vs_psi.gp", "m(t) and the ODE solution", "t", "value", ["'m_vs_psi.csv' using 1:2 with lines", "'m_vs_psi.csv' using 1:3 with lines"], logscale="y")
        pred = ProfilePrediction("global", cfg.spec, T_hat=record.estimate.T_hat)
        rep = verify_against_run(record, [pred], Window(K=ana.K), keep_rows=True)[0]
        write_csv(out / "profile_ratio.csv", ["x", "t", "u", "prediction", "ratio"], rep.rows)
        _gnuplot(out / "plot_profile_ratio.gp", "u / global profile", "x", "ratio", ["'profile_ratio.csv' using 1:5 with points pt 7 ps 0.3"], logscale="x")
        summary["global_profile"] = rep.as_dict()
        trend = global_trend(record, pred, K=ana.K)
        summary["global_trend"] = trend
        flags["global_trend_monotone"] = trend["monotone"]

        def q(frs):
            return [f.s * project(f, basis).b for f in frs]

        band = uncertainty_band(record, q, Y_max=ana.Y_max, tau_margin=ana.tau_margin, min_core_nodes=ana.min_core_nodes)
        write_json(out / "bands.json", {"quantity": "s_b", **band})
        summary["T_hat"] = record.estimate.T_hat
        summary["spread"] = record.estimate.spread
    summary["flags"] = flags
    write_json(out / "analysis.json", summary)
    write_json(out / "manifest.json", _manifest(cfg, "analyze", run_dir=str(run_dir) if run_dir else None))
    for k, v in flags.items():
        print(f"{k:32s} {'pass' if v else 'FAIL'}")
    if strict and not all(flags.values()):
        return EXIT_CHECKS
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    """Run the acceptance criteria; exit 0 iff all selected criteria pass."""
    ver = cfg.verification
    ctx = ReferenceContext(seed=ver.seed, samples=ver.samples)
    results = run_all(ver.criteria, ctx, threads=thread_count())
    for r in results:
        print(r.line())
    all_ok = all(r.passed for r in results)
    write_json(out / "verify.json", {"all_passed": all_ok, "criteria": [r.as_dict() for r in results]})
    write_json(out / "manifest.json", _manifest(cfg, "verify", threads=thread_count()))
    return EXIT_OK if all_ok else EXIT_CHECKS


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blowup-lab", description="Blow-up experiments for u_t = Laplacian(u) + f(u).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("resolvent", "tabulate G (and H), check asymptotic equivalences"),
        ("solve", "run the radial solver and save the run directory"),
        ("analyze", "similarity-variable analysis of a run"),
        ("verify", "run the acceptance criteria"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="INI experiment file")
        p.add_argument("--strict", action="store_true", help="turn failed trend verdicts into exit code 1")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        if name == "analyze":
            p.add_argument("--run", help="existing run directory (otherwise [analysis] run_dir, otherwise solve first)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, require_run=args.command == "solve")
        out = Path(args.out or cfg.output_dir)
        if args.command == "resolvent":
            return cmd_resolvent(cfg, out, args.strict)
        if args.command == "solve":
            return cmd_solve(cfg, out)[0]
        if args.command == "analyze":
            run = args.run or cfg.analysis.run_dir
            return cmd_analyze(cfg, out, Path(run) if run else None, args.strict)
        return cmd_verify(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
