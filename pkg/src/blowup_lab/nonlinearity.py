"""Regularly varying nonlinearities f(u) = u^p L(u).

Each slowly varying factor L belongs to a small closed catalogue of
families.  Every family supplies L together with its first two derivatives
in closed form; f and its derivatives follow from the product rule.  Below
the family threshold ``s_min`` the nonlinearity is continued by a C^1 power
law so that solvers may evaluate f on small values of u.

All arrays are float64; every public routine accepts scalars or arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Sequence

import numpy as np

__all__ = [
    "NonlinearityError",
    "DomainError",
    "DerivativeUndefinedError",
    "PurePower",
    "LogPower",
    "IteratedLog",
    "ExpLogPow",
    "OscillatingLogSin",
    "ExpLogCos",
    "SinLogPow",
    "FAMILIES",
    "NonlinearitySpec",
    "SlowVariationDiagnostics",
    "HypothesisReport",
    "sobolev_exponent",
    "eval_f",
    "eval_L",
    "slow_variation_index",
    "karamata_interval",
    "karamata_ratio_bound",
    "locate_M",
    "aux_convexity_check",
    "validate_hypotheses",
    "catalogue",
    "spec_to_config",
    "spec_from_config",
]

DEFAULT_ALPHA = 0.6
M_SCAN_CAP = 1e300


class NonlinearityError(ValueError):
    """Base class for errors raised while evaluating a nonlinearity."""


class DomainError(NonlinearityError):
    """Raised for arguments outside the domain of f (negative values)."""


class DerivativeUndefinedError(NonlinearityError):
    """Raised when derivatives are requested below the smoothness threshold."""


def _arr(s) -> np.ndarray:
    return np.asarray(s, dtype=float)


# ---------------------------------------------------------------------------
# Families of slowly varying factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PurePower:
    """L identically equal to one, so that f(s) = s^p."""

    key: ClassVar[str] = "pure_power"

    def violations(self) -> list[str]:
        return []

    def definability(self) -> list[str]:
        return []

    def threshold(self) -> float:
        return 0.0

    def derivs(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        one = np.ones_like(s)
        zero = np.zeros_like(s)
        return one, zero, zero

    def params(self) -> dict[str, float]:
        return {}


@dataclass(frozen=True)
class LogPower:
    """L(s) = log^a(K + s)."""

    K: float = 2.0
    a: float = 1.0
    key: ClassVar[str] = "log_power"

    def violations(self) -> list[str]:
        return [] if self.K > 1.0 else [f"K must exceed 1 (got K={self.K})"]

    def definability(self) -> list[str]:
        return self.violations()

    def threshold(self) -> float:
        # With a negative exponent the factor only becomes well behaved once
        # log(K + s) exceeds one.
        if self.a < 0:
            return max(0.0, math.e - self.K)
        return 0.0

    def derivs(self, s):
        z = self.K + s
        lg = np.log(z)
        a = self.a
        L = lg**a
        L1 = a * lg ** (a - 1.0) / z
        L2 = a * ((a - 1.0) * lg ** (a - 2.0) - lg ** (a - 1.0)) / z / z
        return L, L1, L2

    def params(self) -> dict[str, float]:
        return {"K": self.K, "a": self.a}


def _tower(m: int) -> float:
    """exp applied m times to zero: 1, e, e^e, ..."""
    v = 0.0
    for _ in range(m):
        v = math.exp(v)
    return v


@dataclass(frozen=True)
class IteratedLog:
    """L(s) = log_m(K + s), the m-fold iterated logarithm."""

    m: int = 2
    K: float = 20.0
    key: ClassVar[str] = "iterated_log"

    def violations(self) -> list[str]:
        out = []
        if int(self.m) != self.m or self.m < 1:
            out.append(f"m must be a positive integer (got m={self.m})")
        elif self.m > 4:
            out.append(f"m above 4 is not supported (got m={self.m})")
        elif not self.K > _tower(int(self.m)):
            out.append(
                f"K must exceed exp^{int(self.m)}(0) = {_tower(int(self.m)):.6g} (got K={self.K})"
            )
        return out

    def definability(self) -> list[str]:
        return self.violations()

    def threshold(self) -> float:
        return 0.0

    def derivs(self, s):
        z = self.K + s
        logs = []
        cur = z
        for _ in range(int(self.m)):
            cur = np.log(cur)
            logs.append(cur)
        # D_k = d l_k / dz = 1 / (z l_1 ... l_{k-1})
        D = [1.0 / z]
        for k in range(1, int(self.m)):
            D.append(D[-1] / logs[k - 1])
        L = logs[-1]
        L1 = D[-1]
        acc = 1.0 / z
        for k in range(int(self.m) - 1):
            acc = acc + D[k] / logs[k]
        L2 = -L1 * acc
        return L, L1, L2

    def params(self) -> dict[str, float]:
        return {"m": int(self.m), "K": self.K}


@dataclass(frozen=True)
class ExpLogPow:
    """L(s) = exp(|log s|^nu), smooth for s > 1; used for s >= e."""

    nu: float = 0.3
    key: ClassVar[str] = "exp_log_pow"

    def violations(self) -> list[str]:
        return [] if 0.0 < self.nu < 0.5 else [f"nu must lie in (0, 1/2) (got nu={self.nu})"]

    def definability(self) -> list[str]:
        return [] if self.nu > 0 else [f"nu must be positive (got nu={self.nu})"]

    def threshold(self) -> float:
        return math.e

    def derivs(self, s):
        nu = self.nu
        x = np.log(s)
        g = x**nu
        g1 = nu * x ** (nu - 1.0) / s
        g2 = (nu * (nu - 1.0) * x ** (nu - 2.0) - nu * x ** (nu - 1.0)) / s / s
        L = np.exp(g)
        return L, L * g1, L * (g1 * g1 + g2)

    def params(self) -> dict[str, float]:
        return {"nu": self.nu}


@dataclass(frozen=True)
class OscillatingLogSin:
    """L(s) = log(3 + s)^{sin(log log(3 + s))}."""

    key: ClassVar[str] = "oscillating_log_sin"

    def violations(self) -> list[str]:
        return []

    def definability(self) -> list[str]:
        return []

    def threshold(self) -> float:
        return 0.0

    def derivs(self, s):
        z = 3.0 + s
        lg = np.log(z)
        ll = np.log(lg)
        sn, cs = np.sin(ll), np.cos(ll)
        d1 = 1.0 / (z * lg)
        d2 = -(lg + 1.0) / (z * lg) / (z * lg)
        E1 = (cs * ll + sn) * d1
        E2 = (2.0 * cs - ll * sn) * d1 * d1 + (cs * ll + sn) * d2
        L = np.exp(sn * ll)
        return L, L * E1, L * (E1 * E1 + E2)

    def params(self) -> dict[str, float]:
        return {}


@dataclass(frozen=True)
class ExpLogCos:
    """L(s) = exp(|log s|^nu cos(|log s|^gamma)); used for s >= e."""

    nu: float = 0.15
    gamma: float = 0.2
    key: ClassVar[str] = "exp_log_cos"

    def violations(self) -> list[str]:
        out = []
        if not (self.nu > 0 and self.gamma > 0):
            out.append(f"nu and gamma must be positive (got nu={self.nu}, gamma={self.gamma})")
        if not self.nu + self.gamma < 0.5:
            out.append(f"nu + gamma must be below 1/2 (got {self.nu + self.gamma:.6g})")
        return out

    def definability(self) -> list[str]:
        if self.nu > 0 and self.gamma > 0:
            return []
        return ["nu and gamma must be positive"]

    def threshold(self) -> float:
        return math.e

    def derivs(self, s):
        nu, ga = self.nu, self.gamma
        x = np.log(s)
        xg = x**ga
        c, sn = np.cos(xg), np.sin(xg)
        E = x**nu * c
        Ex = nu * x ** (nu - 1.0) * c - ga * x ** (nu + ga - 1.0) * sn
        Exx = (
            nu * (nu - 1.0) * x ** (nu - 2.0) * c
            - nu * ga * x ** (nu + ga - 2.0) * sn
            - ga * (nu + ga - 1.0) * x ** (nu + ga - 2.0) * sn
            - ga * ga * x ** (nu + 2.0 * ga - 2.0) * c
        )
        E1 = Ex / s
        E2 = (Exx - Ex) / s / s
        L = np.exp(E)
        return L, L * E1, L * (E1 * E1 + E2)

    def params(self) -> dict[str, float]:
        return {"nu": self.nu, "gamma": self.gamma}


@dataclass(frozen=True)
class SinLogPow:
    """L(s) = 1 + a sin(log^nu(2 + s))."""

    a: float = 0.5
    nu: float = 0.1
    key: ClassVar[str] = "sin_log_pow"

    def violations(self) -> list[str]:
        out = []
        if not abs(self.a) < 1.0:
            out.append(f"|a| must be below 1 (got a={self.a})")
        if not 0.0 < self.nu < 0.5:
            out.append(f"nu must lie in (0, 1/2) (got nu={self.nu})")
        return out

    def definability(self) -> list[str]:
        out = []
        if not abs(self.a) < 1.0:
            out.append(f"|a| must be below 1 (got a={self.a})")
        if not self.nu > 0:
            out.append(f"nu must be positive (got nu={self.nu})")
        return out

    def threshold(self) -> float:
        return 0.0

    def derivs(self, s):
        a, nu = self.a, self.nu
        z = 2.0 + s
        x = np.log(z)
        x1 = 1.0 / z
        x2 = -1.0 / z / z
        g = x**nu
        gx = nu * x ** (nu - 1.0)
        gxx = nu * (nu - 1.0) * x ** (nu - 2.0)
        sn, cs = np.sin(g), np.cos(g)
        g1 = gx * x1
        g2 = gxx * x1 * x1 + gx * x2
        L = 1.0 + a * sn
        L1 = a * cs * g1
        L2 = a * (-sn * g1 * g1 + cs * g2)
        return L, L1, L2

    def params(self) -> dict[str, float]:
        return {"a": self.a, "nu": self.nu}


FAMILIES: dict[str, type] = {
    cls.key: cls
    for cls in (PurePower, LogPower, IteratedLog, ExpLogPow, OscillatingLogSin, ExpLogCos, SinLogPow)
}


# ---------------------------------------------------------------------------
# Nonlinearity objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonlinearitySpec:
    """Exponent p together with a slowly varying family.

    ``s_min`` is derived from the family at construction.  Catalogue
    parameter constraints are enforced unless ``enforce_constraints`` is
    False, which is useful when a hypothesis report is wanted for a
    deliberately inadmissible choice.  Constraints that are needed for L to
    be positive and well defined are always enforced.
    """

    p: float
    family: Any = field(default_factory=PurePower)
    enforce_constraints: bool = field(default=True, compare=False, repr=False)
    s_min: float = field(init=False)
    _q_ext: float = field(init=False, repr=False, compare=False)
    _f_min: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = float(self.p)
        object.__setattr__(self, "p", p)
        if not (np.isfinite(p) and p > 1.0):
            raise NonlinearityError(f"exponent p must exceed 1 (got p={self.p})")
        if type(self.family).__name__ not in {c.__name__ for c in FAMILIES.values()}:
            raise NonlinearityError(f"unknown family descriptor {self.family!r}")
        problems = self.family.definability()
        if self.enforce_constraints:
            problems = problems + [v for v in self.family.violations() if v not in problems]
        if problems:
            raise NonlinearityError("; ".join(problems))
        s_min = float(self.family.threshold())
        object.__setattr__(self, "s_min", s_min)
        if s_min > 0:
            L, L1, _ = self.family.derivs(np.array(s_min))
            if not L > 0:
                raise NonlinearityError("L is not positive at the family threshold")
            f0 = s_min**p * float(L)
            f1 = p * s_min ** (p - 1.0) * float(L) + s_min**p * float(L1)
            q = s_min * f1 / f0
            if not q > 0:
                raise NonlinearityError(
                    "the C^1 continuation below s_min needs a positive slope of f at s_min"
                )
            object.__setattr__(self, "_q_ext", float(q))
            object.__setattr__(self, "_f_min", float(f0))
        else:
            object.__setattr__(self, "_q_ext", p)
            object.__setattr__(self, "_f_min", 0.0)

    # -- vectorised internals (no argument checking) -------------------------

    @property
    def name(self) -> str:
        return self.family.key

    def L_derivs(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """L, L', L'' for s >= s_min (unchecked)."""
        return self.family.derivs(_arr(s))

    def log_f(self, s) -> np.ndarray:
        """log f(s) for s >= s_min, computed without forming s^p."""
        s = _arr(s)
        L = self.family.derivs(s)[0]
        return self.p * np.log(s) + np.log(L)

    def f(self, s) -> np.ndarray:
        """f(s) for s >= 0, including the continuation below s_min (unchecked)."""
        s = _arr(s)
        if self.s_min <= 0:
            return s**self.p * self.family.derivs(s)[0]
        hi = s >= self.s_min
        sh = np.where(hi, s, self.s_min)
        val_hi = sh**self.p * self.family.derivs(sh)[0]
        val_lo = self._f_min * (np.clip(s, 0.0, self.s_min) / self.s_min) ** self._q_ext
        return np.where(hi, val_hi, val_lo)

    def f_derivs(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """f, f', f'' for s > 0 with the continuation used below s_min (unchecked)."""
        s = _arr(s)
        p = self.p
        sh = np.maximum(s, self.s_min) if self.s_min > 0 else s
        with np.errstate(divide="ignore", invalid="ignore"):
            L, L1, L2 = self.family.derivs(sh)
            sp = sh**p
            f0 = sp * L
            f1 = p * sh ** (p - 1.0) * L + sp * L1
            f2 = p * (p - 1.0) * sh ** (p - 2.0) * L + 2.0 * p * sh ** (p - 1.0) * L1 + sp * L2
            if self.s_min > 0:
                q = self._q_ext
                lo = s < self.s_min
                sl = np.clip(s, 0.0, self.s_min)
                g0 = self._f_min * (sl / self.s_min) ** q
                g1 = q * g0 / sl
                g2 = q * (q - 1.0) * g0 / sl**2
                f0 = np.where(lo, g0, f0)
                f1 = np.where(lo, g1, f1)
                f2 = np.where(lo, g2, f2)
        return f0, f1, f2

    def fprime(self, s) -> np.ndarray:
        """f'(s) for s >= 0 with f'(0) taken as 0 (unchecked, used for step control)."""
        s = _arr(s)
        pos = s > 0
        sp = np.where(pos, s, 1.0)
        return np.where(pos, self.f_derivs(sp)[1], 0.0)


def sobolev_exponent(n: int) -> float:
    """Critical exponent (n+2)/(n-2) for n >= 3, infinity otherwise."""
    if n <= 2:
        return math.inf
    return (n + 2.0) / (n - 2.0)


def _scalarize(values, scalar: bool):
    if scalar:
        return tuple(float(v) for v in values)
    return tuple(np.asarray(v, dtype=float) for v in values)


def _check_domain(spec: NonlinearitySpec, s: np.ndarray, derivatives: bool) -> None:
    if np.any(~np.isfinite(s)):
        raise DomainError("argument must be finite")
    if np.any(s < 0):
        raise DomainError("f is only defined for s >= 0")
    if derivatives:
        if np.any(s < spec.s_min):
            raise DerivativeUndefinedError(
                f"derivatives requested below s_min = {spec.s_min:.6g}"
            )
        if np.any(s == 0) and spec.p < 2.0:
            raise DerivativeUndefinedError("f'' is unbounded at s = 0 when p < 2")


def eval_f(spec: NonlinearitySpec, s, derivatives: bool = True):
    """Return (f, f', f'') at ``s``; with ``derivatives=False`` return f only.

    Below ``s_min`` only the value of the C^1 continuation is available.
    """
    arr = _arr(s)
    _check_domain(spec, arr, derivatives)
    if not derivatives:
        val = spec.f(arr)
        return float(val) if arr.ndim == 0 else val
    return _scalarize(spec.f_derivs(arr), arr.ndim == 0)


def eval_L(spec: NonlinearitySpec, s):
    """Return (L, L', L'') at ``s`` >= s_min."""
    arr = _arr(s)
    _check_domain(spec, arr, True)
    return _scalarize(spec.L_derivs(arr), arr.ndim == 0)


# ---------------------------------------------------------------------------
# Slow-variation diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlowVariationDiagnostics:
    """Scale-free measures of how slowly L varies at ``s``."""

    s: float
    eta1: float
    eta2: float
    weighted1: float
    weighted2: float


def slow_variation_index(spec: NonlinearitySpec, s: float, alpha: float = DEFAULT_ALPHA):
    """Diagnostics eta1 = sL'/L, eta2 = s^2 L''/L and their weighted forms.

    ``weighted2`` equals (sL'/L)' * s * log s, expanded as
    (eta1 + eta2 - eta1^2) log s.
    """
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1) (got {alpha})")
    if not s > 1.0:
        raise DomainError("diagnostics need s > 1 so that log s is positive")
    L, L1, L2 = eval_L(spec, s)
    eta1 = s * L1 / L
    eta2 = s * s * L2 / L
    ls = math.log(s)
    return SlowVariationDiagnostics(
        s=float(s),
        eta1=eta1,
        eta2=eta2,
        weighted1=eta1 * ls**alpha,
        weighted2=(eta1 + eta2 - eta1 * eta1) * ls,
    )


def karamata_interval(s: float, alpha: float = DEFAULT_ALPHA) -> tuple[float, float]:
    """The admissible dilation interval I_s = [exp(-log^a(s)/8), exp(log^a(s)/8)]."""
    h = math.log(s) ** alpha / 8.0
    return math.exp(-h), math.exp(h)


def karamata_ratio_bound(
    spec: NonlinearitySpec,
    s: float,
    lam: float,
    alpha: float = DEFAULT_ALPHA,
    s_gate: float = math.e**2,
) -> float:
    """Margin 4|log lam|/log^a(s) - |L(lam s)/L(s) - 1|; nonnegative when the bound holds."""
    if s < s_gate:
        raise ValueError(f"s = {s:.6g} is below the gate {s_gate:.6g}")
    lo, hi = karamata_interval(s, alpha)
    if not (lo * (1 - 1e-14) <= lam <= hi * (1 + 1e-14)):
        raise ValueError(f"lambda = {lam:.6g} lies outside I_s = [{lo:.6g}, {hi:.6g}]")
    Ls = eval_L(spec, s)[0]
    Lls = eval_L(spec, lam * s)[0]
    bound = 4.0 * abs(math.log(lam)) / math.log(s) ** alpha
    return bound - abs(Lls / Ls - 1.0)


# ---------------------------------------------------------------------------
# Auxiliary convex function F = f / (A + log f)
# ---------------------------------------------------------------------------


def _gate_ok(spec: NonlinearitySpec, s: float) -> bool:
    f0, f1, _ = spec.f_derivs(np.array(s))
    return bool(np.log(f0) >= 4.0 - 1e-12 and f1 >= 0)


def locate_M(spec: NonlinearitySpec, cap: float = M_SCAN_CAP) -> float:
    """First point of the doubling scan from max(s_min, 1) with f >= e^4 and f' >= 0."""
    s = max(spec.s_min, 1.0)
    while s <= cap:
        if _gate_ok(spec, s):
            return s
        s *= 2.0
    raise NonlinearityError(f"no M with f >= e^4 and f' >= 0 found below {cap:.3g}")


def aux_convexity_check(spec: NonlinearitySpec, A: float, s: float):
    """Return (phi, F, F', F'') for F = f phi with phi = 1/(A + log f).

    The point must satisfy the gate f(s) >= e^4 and f'(s) >= 0; the doubling
    scan of :func:`locate_M` is coarser, so its result is an admissible but
    not necessarily the smallest gate point.
    """
    if A < 0:
        raise ValueError("A must be nonnegative")
    if s < spec.s_min or not s > 0:
        raise DerivativeUndefinedError(f"s = {s:.6g} is below s_min")
    f0, f1, f2 = (float(v) for v in spec.f_derivs(np.array(s)))
    lf = float(spec.log_f(s))
    if not (lf >= 4.0 * (1 - 1e-12) and f1 >= 0):
        raise NonlinearityError(f"s = {s:.6g} is outside the gate f >= e^4, f' >= 0")
    phi = 1.0 / (A + lf)
    F = f0 * phi
    F1 = f1 * phi * (1.0 - phi)
    # d(phi)/ds = -phi^2 f'/f ; differentiate f' phi (1 - phi) once more.
    dphi = -phi * phi * f1 / f0
    F2 = f2 * phi * (1.0 - phi) + f1 * dphi * (1.0 - 2.0 * phi)
    return phi, F, F1, F2


# ---------------------------------------------------------------------------
# Hypothesis report
# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    """Pass/fail entries for the structural hypotheses on f."""

    spec_name: str
    p: float
    n: int
    entries: dict[str, bool] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.entries.values())

    def as_dict(self) -> dict[str, Any]:
        return {
            "family": self.spec_name,
            "p": self.p,
            "n": self.n,
            "passed": self.passed,
            "entries": dict(self.entries),
            "notes": dict(self.notes),
        }


def _decays(values: Sequence[float]) -> bool:
    # Symmetric halves: for an odd ladder the median point belongs to neither.
    v = np.abs(np.asarray(values, dtype=float))
    n = len(v)
    return bool(np.all(np.isfinite(v)) and v[(n + 1) // 2 :].max() < v[: n // 2].max())


def validate_hypotheses(
    spec: NonlinearitySpec,
    n: int,
    alpha: float = DEFAULT_ALPHA,
    s_ladder: Sequence[float] | None = None,
) -> HypothesisReport:
    """Check subcriticality, catalogue constraints, positivity and decay trends."""
    if s_ladder is None:
        s_ladder = [math.exp(k) for k in range(10, 61, 5)]
    s_ladder = np.asarray(s_ladder, dtype=float)
    if s_ladder.size == 0:
        raise ValueError("empty ladder")
    rep = HypothesisReport(spec_name=spec.name, p=spec.p, n=int(n))
    pS = sobolev_exponent(int(n))
    rep.entries["p_range"] = 1.0 < spec.p < pS
    rep.notes["p_range"] = f"p = {spec.p:g}, critical exponent = {pS:g}"
    viol = spec.family.violations()
    rep.entries["parameter_constraints"] = not viol
    if viol:
        rep.notes["parameter_constraints"] = "; ".join(viol)
    usable = s_ladder[s_ladder >= max(spec.s_min, 1.0 + 1e-9)]
    if usable.size == 0:
        rep.entries["positivity"] = False
        rep.notes["positivity"] = "no ladder point at or above s_min"
        return rep
    L = spec.L_derivs(usable)[0]
    fv = spec.f(usable)
    rep.entries["positivity"] = bool(np.all(L > 0) and np.all(fv > 0))
    diags = [slow_variation_index(spec, float(s), alpha) for s in usable]
    w1 = [d.weighted1 for d in diags]
    w2 = [d.weighted2 for d in diags]
    if spec.name == PurePower.key:
        rep.entries["weighted1_decay"] = bool(np.allclose(w1, 0.0))
        rep.entries["weighted2_decay"] = bool(np.allclose(w2, 0.0))
    else:
        rep.entries["weighted1_decay"] = len(w1) >= 2 and _decays(w1)
        rep.entries["weighted2_decay"] = len(w2) >= 2 and _decays(w2)
    rep.notes["weighted1_max"] = f"{np.max(np.abs(w1)):.6g}"
    rep.notes["weighted2_max"] = f"{np.max(np.abs(w2)):.6g}"
    return rep


# ---------------------------------------------------------------------------
# Catalogue and config serialization
# ---------------------------------------------------------------------------


def catalogue(p: float = 2.0) -> list[NonlinearitySpec]:
    """One admissible representative of each family, all sharing the exponent p."""
    return [
        NonlinearitySpec(p, PurePower()),
        NonlinearitySpec(p, LogPower(K=2.0, a=1.0)),
        NonlinearitySpec(p, IteratedLog(m=2, K=20.0)),
        NonlinearitySpec(p, ExpLogPow(nu=0.3)),
        NonlinearitySpec(p, OscillatingLogSin()),
        NonlinearitySpec(p, ExpLogCos(nu=0.15, gamma=0.2)),
        NonlinearitySpec(p, SinLogPow(a=0.5, nu=0.1)),
    ]


_PARAM_TYPES = {"m": int}


def spec_to_config(spec: NonlinearitySpec) -> dict[str, Any]:
    """Flat key/value representation, e.g. {'family': 'log_power', 'p': 2.0, 'K': 2.0, 'a': 1.0}."""
    out: dict[str, Any] = {"family": spec.name, "p": spec.p}
    out.update(spec.family.params())
    return out


def spec_from_config(cfg: dict[str, Any], enforce_constraints: bool = True) -> NonlinearitySpec:
    """Inverse of :func:`spec_to_config`; string values are parsed.

    Raises ``KeyError`` naming a missing key and ``ValueError`` naming a
    key whose value cannot be parsed or is not recognised.
    """
    if "family" not in cfg:
        raise KeyError("family")
    if "p" not in cfg:
        raise KeyError("p")
    fam_key = str(cfg["family"]).strip().strip('"').strip("'")
    if fam_key not in FAMILIES:
        raise ValueError(f"family: unknown family {fam_key!r}")
    cls = FAMILIES[fam_key]
    try:
        p = float(cfg["p"])
    except (TypeError, ValueError):
        raise ValueError(f"p: cannot parse {cfg['p']!r} as a number") from None
    known = set(cls.__dataclass_fields__)
    kwargs = {}
    for key, val in cfg.items():
        if key in ("family", "p"):
            continue
        if key not in known:
            raise ValueError(f"{key}: not a parameter of family {fam_key!r}")
        typ = _PARAM_TYPES.get(key, float)
        try:
            kwargs[key] = typ(float(val)) if typ is int else typ(val)
        except (TypeError, ValueError):
            raise ValueError(f"{key}: cannot parse {val!r}") from None
    return NonlinearitySpec(p, cls(**kwargs), enforce_constraints=enforce_constraints)
