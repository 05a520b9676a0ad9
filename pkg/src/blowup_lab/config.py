"""INI experiment configuration with typed keys and explicit defaults.

Sections: ``[nonlinearity]``, ``[resolvent]``, ``[run]``, ``[analysis]``,
``[verification]`` and ``[output]``.  Keys are case sensitive.  Every key
that is not given in the file is filled from the schema and listed in
``ExperimentConfig.defaulted``, so manifests never hide a default.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .nonlinearity import FAMILIES, NonlinearitySpec, spec_from_config, spec_to_config
from .pde_solver import Ball, GridSpec, PlateauGaussian, RunConfig, Tabulated, WholeSpace

__all__ = [
    "ConfigError",
    "ResolventSettings",
    "AnalysisSettings",
    "VerificationSettings",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Malformed configuration; the message starts with the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _str(text: str) -> str:
    return str(text).strip().strip('"').strip("'")


# (type, default) per key; a default of None means "optional, absent".
_SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "resolvent": {
        "X_lo": (float, None),
        "X_hi": (float, 1e40),
        "quad_tol": (float, 1e-13),
        "A": (float, None),
        "ladder_start": (float, 10.0),
        "ladder_stop": (float, 60.0),
        "ladder_step": (float, 5.0),
        "threshold": (float, 0.1),
    },
    "run": {
        "n": (int, 1),
        "domain": (_str, "ball"),
        "R": (float, 1.0),
        "initial": (_str, "plateau_gaussian"),
        "amplitude": (float, 20.0),
        "width": (float, 0.2),
        "plateau": (float, 0.4),
        "r_tab": (_floats, None),
        "u_tab": (_floats, None),
        "nodes": (int, 760),
        "grading": (float, 1.03),
        "core_nodes": (int, 250),
        "safety": (float, 1e-3),
        "rtol": (float, 1e-6),
        "dt_min": (float, 1e-24),
        "dt_max": (float, math.inf),
        "dt_init": (float, 1e-8),
        "U_max": (float, 1e12),
        "t_max": (float, 10.0),
        "n_snapshots": (int, 48),
        "diffusion": (_bool, True),
        "reaction": (_bool, True),
        "max_steps": (int, 5_000_000),
    },
    "analysis": {
        "Y_max": (float, 12.0),
        "tau_margin": (float, 1e3),
        "min_core_nodes": (int, 200),
        "residual_R": (float, 2.0),
        "alpha": (float, 0.6),
        "K": (float, 2.0),
        "run_dir": (_str, None),
        "synthetic": (_bool, False),
    },
    "verification": {
        "criteria": (_ints, tuple(range(1, 15))),
        "seed": (int, 20240601),
        "samples": (int, 1000),
    },
    "output": {
        "dir": (_str, "blowup-lab-out"),
    },
}


@dataclass(frozen=True)
class ResolventSettings:
    X_lo: float | None = None
    X_hi: float = 1e40
    quad_tol: float = 1e-13
    A: float | None = None
    ladder_start: float = 10.0
    ladder_stop: float = 60.0
    ladder_step: float = 5.0
    threshold: float = 0.1


@dataclass(frozen=True)
class AnalysisSettings:
    Y_max: float = 12.0
    tau_margin: float = 1e3
    min_core_nodes: int = 200
    residual_R: float = 2.0
    alpha: float = 0.6
    K: float = 2.0
    run_dir: str | None = None
    synthetic: bool = False


@dataclass(frozen=True)
class VerificationSettings:
    criteria: tuple[int, ...] = tuple(range(1, 15))
    seed: int = 20240601
    samples: int = 1000


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Resolved experiment: every section with all defaults applied."""

    spec: NonlinearitySpec
    run: RunConfig | None
    resolvent: ResolventSettings
    analysis: AnalysisSettings
    verification: VerificationSettings
    output_dir: str
    resolved: dict = field(repr=False)
    defaulted: tuple[str, ...] = ()
    run_error: str | None = None

    def echo(self) -> dict[str, Any]:
        """Full resolved configuration for manifests."""
        return self.resolved


def _section(parser: configparser.ConfigParser, name: str) -> dict[str, str]:
    return dict(parser.items(name)) if parser.has_section(name) else {}


def _typed(section: str, raw: dict[str, str], defaulted: list[str]) -> dict[str, Any]:
    schema = _SCHEMA[section]
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{section}.{key}", "unknown key")
    out = {}
    for key, (typ, default) in schema.items():
        if key in raw:
            try:
                out[key] = typ(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{section}.{key}", f"cannot parse {raw[key]!r} ({exc})") from None
        else:
            out[key] = default
            if default is not None:
                defaulted.append(f"{section}.{key}")
    return out


def _nonlinearity(raw: dict[str, str], defaulted: list[str]) -> NonlinearitySpec:
    raw = dict(raw)
    enforce = True
    if "enforce_constraints" in raw:
        try:
            enforce = _bool(raw.pop("enforce_constraints"))
        except ValueError as exc:
            raise ConfigError("nonlinearity.enforce_constraints", str(exc)) from None
    else:
        defaulted.append("nonlinearity.enforce_constraints")
    if "family" not in raw:
        raw["family"] = "pure_power"
        defaulted.append("nonlinearity.family")
    try:
        spec = spec_from_config(raw, enforce_constraints=enforce)
    except KeyError as exc:
        raise ConfigError(f"nonlinearity.{exc.args[0]}", "missing required key") from None
    except ValueError as exc:
        msg = str(exc)
        cls = FAMILIES.get(_str(raw["family"]))
        known = ["family", "p"] + (list(cls.__dataclass_fields__) if cls else [])
        lead = re.match(r"([A-Za-z_]\w*):", msg)
        if lead:
            key = lead.group(1)
            msg = msg[lead.end():].strip()
        else:
            words = re.findall(r"[A-Za-z_]+", msg)
            key = next((w for w in words if w in known), "family")
        raise ConfigError(f"nonlinearity.{key}", msg) from None
    for key in spec.family.params():
        if key not in raw:
            defaulted.append(f"nonlinearity.{key}")
    return spec


def _run_config(spec: NonlinearitySpec, v: dict[str, Any]) -> RunConfig:
    if v["domain"] == "ball":
        domain = Ball(v["R"])
    elif v["domain"] == "whole_space":
        domain = WholeSpace(v["R"])
    else:
        raise ConfigError("run.domain", f"expected 'ball' or 'whole_space', got {v['domain']!r}")
    if v["initial"] == "plateau_gaussian":
        initial = PlateauGaussian(v["amplitude"], v["width"], v["plateau"])
    elif v["initial"] == "tabulated":
        if v["r_tab"] is None or v["u_tab"] is None:
            raise ConfigError("run.r_tab", "tabulated initial data need r_tab and u_tab")
        initial = Tabulated(v["r_tab"], v["u_tab"])
    else:
        raise ConfigError("run.initial", f"expected 'plateau_gaussian' or 'tabulated', got {v['initial']!r}")
    try:
        grid = GridSpec(v["nodes"], v["grading"], v["core_nodes"])
        return RunConfig(
            spec=spec,
            n=v["n"],
            domain=domain,
            initial=initial,
            grid=grid,
            safety=v["safety"],
            rtol=v["rtol"],
            dt_min=v["dt_min"],
            dt_max=v["dt_max"],
            dt_init=v["dt_init"],
            U_max=v["U_max"],
            t_max=v["t_max"],
            n_snapshots=v["n_snapshots"],
            diffusion=v["diffusion"],
            reaction=v["reaction"],
            max_steps=v["max_steps"],
        )
    except ValueError as exc:
        msg = str(exc)
        key = "run.n" if "dimension" in msg or "critical" in msg else "run"
        raise ConfigError(key, msg) from None


def parse_config(text: str, require_run: bool = False) -> ExperimentConfig:
    """Parse INI text into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (K, U_max, ...)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", f"not valid INI ({exc.__class__.__name__})") from None
    known = set(_SCHEMA) | {"nonlinearity"}
    for sec in parser.sections():
        if sec not in known:
            raise ConfigError(sec, "unknown section")
    if not parser.has_section("nonlinearity"):
        raise ConfigError("nonlinearity", "missing section")
    defaulted: list[str] = []
    spec = _nonlinearity(_section(parser, "nonlinearity"), defaulted)
    res = _typed("resolvent", _section(parser, "resolvent"), defaulted)
    run_vals = _typed("run", _section(parser, "run"), defaulted)
    ana = _typed("analysis", _section(parser, "analysis"), defaulted)
    ver = _typed("verification", _section(parser, "verification"), defaulted)
    out = _typed("output", _section(parser, "output"), defaulted)
    for c in ver["criteria"]:
        if not 1 <= c <= 14:
            raise ConfigError("verification.criteria", f"criterion {c} outside 1..14")
    run = None
    run_error = None
    try:
        run = _run_config(spec, run_vals)
    except ConfigError as exc:
        if require_run or parser.has_section("run"):
            raise
        run_error = str(exc)
    resolved = {
        "nonlinearity": {**spec_to_config(spec), "enforce_constraints": spec.enforce_constraints},
        "resolvent": res,
        "run": run_vals,
        "analysis": ana,
        "verification": {**ver, "criteria": list(ver["criteria"])},
        "output": out,
    }
    return ExperimentConfig(
        spec=spec,
        run=run,
        resolvent=ResolventSettings(**res),
        analysis=AnalysisSettings(**ana),
        verification=VerificationSettings(**ver),
        output_dir=out["dir"],
        resolved=resolved,
        defaulted=tuple(defaulted),
        run_error=run_error,
    )


def load_config(path: str | os.PathLike, require_run: bool = False) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("--config", f"file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), require_run=require_run)
