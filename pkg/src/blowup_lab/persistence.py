"""CSV/JSON output and run persistence.

CSV files are comma separated with a header row and floats written with 17
significant digits, so values round-trip exactly.  JSON is UTF-8 with sorted
keys; non-finite floats are written as the strings "inf", "-inf" and "nan".
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "format_float",
    "write_csv",
    "read_csv",
    "to_jsonable",
    "write_json",
    "read_json",
    "save_run",
    "load_run",
]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Header and a float array of the rows."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    return header, np.asarray(data, dtype=float).reshape(len(data), len(header))


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def write_json(path: str | os.PathLike, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: str | os.PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_run(record, root: str | os.PathLike, config_echo: dict | None = None, defaulted: Sequence[str] = ()) -> Path:
    """Write ``run-<id>/snap-<k>.csv``, ``m_history.csv`` and ``manifest.json``."""
    run_dir = Path(root) / f"run-{record.run_id}"
    run_dir.mkdir(parents=True, exist_ok=True)
    snaps = []
    for k, s in enumerate(record.snapshots):
        name = f"snap-{k}.csv"
        write_csv(run_dir / name, ["r", "u"], zip(s.r, s.u))
        snaps.append({"file": name, "index": k, "t": s.t, "m": s.m, "dt": s.dt})
    write_csv(run_dir / "m_history.csv", ["t", "m"], zip(record.t_hist, record.m_hist))
    est = record.estimate
    manifest = {
        "run_id": record.run_id,
        "status": record.status,
        "config": config_echo or {},
        "defaulted": sorted(defaulted),
        "m_history": "m_history.csv",
        "snapshots": snaps,
        "stats": record.stats,
        "T_hat": est.T_hat if est else None,
        "spread": est.spread if est else None,
        "estimator_points": est.n_last if est else None,
    }
    write_json(run_dir / "manifest.json", manifest)
    return run_dir


def load_run(run_dir: str | os.PathLike, config):
    """Rebuild a RunRecord from a run directory and its RunConfig.

    The blow-up estimate is recomputed from the stored history, which is
    deterministic and reproduces the manifest values.
    """
    from .pde_solver import InsufficientHistoryError, RunRecord, SolutionState, estimate_T

    run_dir = Path(run_dir)
    manifest = read_json(run_dir / "manifest.json")
    snaps = []
    for entry in manifest["snapshots"]:
        _, data = read_csv(run_dir / entry["file"])
        snaps.append(SolutionState(t=float(entry["t"]), r=data[:, 0], u=data[:, 1], dt=float(entry["dt"]), dt_next=math.nan))
    _, hist = read_csv(run_dir / manifest["m_history"])
    record = RunRecord(
        config=config,
        snapshots=tuple(snaps),
        t_hist=hist[:, 0],
        m_hist=hist[:, 1],
        status=manifest["status"],
        estimate=None,
        stats=manifest.get("stats", {}),
        run_id=manifest["run_id"],
    )
    if record.status == "blow-up":
        try:
            record = replace(record, estimate=estimate_T(record))
        except InsufficientHistoryError:
            pass
    return record
