"""Similarity variables and the weighted spectral decomposition of the rescaled flow.

A snapshot u(r, t) of a blow-up run is rescaled to

    y = r / sqrt(T - t),   s = -log(T - t),   w = u / psi(t),   phi = 1 - w,

with psi(t) = G_inv(T - t) the ODE blow-up solution.  The profile phi is then
decomposed in the Gaussian-weighted space L^2_rho, rho = exp(-|y|^2/4), as

    phi = a H_0 + b H_2 + theta,   H_0 = c0,   H_2 = c2 (|y|^2 - 2n),

and the neutral coefficient b(s) is compared with its predicted decay
1 / (4 p c2 s).

Radial integrals over R^n are evaluated with a composite Gauss-Legendre rule
on [0, Y_max] whose weights carry rho(y) y^(n-1) |S^(n-1)| (|S^0| = 2 covers
the full line for n = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn

from .finite_diff import radial_derivative
from .nonlinearity import NonlinearitySpec
from .quadrature import gauss_legendre
from .resolvent import G_inv, ResolventTable, default_table

__all__ = [
    "UnresolvedCoreError",
    "InsufficientFramesError",
    "HermiteBasis",
    "SimilarityFrame",
    "SpectralCoefficients",
    "hermite_constants",
    "hermite_cubic_moment",
    "weighted_inner",
    "to_similarity",
    "synthetic_frame",
    "select_frames",
    "project",
    "NeutralModeTrack",
    "neutral_mode_track",
    "theorem1_residual",
    "h_of_s",
    "PolyGaussTrial",
    "poincare_check",
    "LowerDecay",
    "lower_decay_check",
    "uncertainty_band",
]


class UnresolvedCoreError(ValueError):
    """Raised when a snapshot has too few nodes inside the self-similar core."""


class InsufficientFramesError(ValueError):
    """Raised when a frame series is too short for a trend statement."""


def _sphere_area(n: int) -> float:
    """|S^(n-1)|; equals 2 for n = 1 (the two half-lines)."""
    return 2.0 * math.pi ** (n / 2) / gamma_fn(n / 2)


# ---------------------------------------------------------------------------
# Basis and inner product
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    """Normalised H_0, H_2 and the radial quadrature rule for L^2_rho(R^n)."""

    n: int
    Y_max: float = 12.0
    panels: int = 48
    order: int = 16
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    c0: float = field(init=False)
    c2: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or not 1 <= self.n <= 10:
            raise ValueError("dimension n must be an integer in [1, 10]")
        if self.panels < 1 or self.order < 2 or not self.Y_max > 0:
            raise ValueError("need panels >= 1, order >= 2 and Y_max > 0")
        x, wx = gauss_legendre(self.order)
        edges = np.linspace(0.0, self.Y_max, self.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        y = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        w = (half[:, None] * wx[None, :]).ravel()
        w = w * np.exp(-0.25 * y * y) * y ** (self.n - 1) * _sphere_area(int(self.n))
        object.__setattr__(self, "nodes", y)
        object.__setattr__(self, "weights", w)
        mass = float(np.sum(w))
        var = float(np.sum(w * (y * y - 2 * self.n) ** 2))
        object.__setattr__(self, "c0", mass**-0.5)
        object.__setattr__(self, "c2", var**-0.5)

    def H0(self, y: np.ndarray | None = None) -> np.ndarray:
        y = self.nodes if y is None else np.asarray(y, dtype=float)
        return np.full_like(y, self.c0)

    def H2(self, y: np.ndarray | None = None) -> np.ndarray:
        y = self.nodes if y is None else np.asarray(y, dtype=float)
        return self.c2 * (y * y - 2 * self.n)

    def dH2(self, y: np.ndarray | None = None) -> np.ndarray:
        """Radial derivative of H_2."""
        y = self.nodes if y is None else np.asarray(y, dtype=float)
        return 2.0 * self.c2 * y

    def inner(self, fa: np.ndarray, fb: np.ndarray) -> float:
        return float(np.sum(self.weights * fa * fb))

    def norm(self, fa: np.ndarray) -> float:
        return math.sqrt(max(self.inner(fa, fa), 0.0))

    def refined(self) -> "HermiteBasis":
        """Same rule with twice the panels (quadrature-doubling checks)."""
        return HermiteBasis(self.n, self.Y_max, 2 * self.panels, self.order)

    def quality(self) -> dict[str, float]:
        """Deviations of the stored basis from orthonormality."""
        h0, h2 = self.H0(), self.H2()
        return {
            "norm_H0_minus_1": self.norm(h0) - 1.0,
            "norm_H2_minus_1": self.norm(h2) - 1.0,
            "inner_H0_H2": self.inner(h0, h2),
        }


def hermite_constants(n: int, basis: HermiteBasis | None = None) -> tuple[float, float]:
    """(c0, c2) by quadrature; closed forms are (4 pi)^(-n/4) and (8n)^(-1/2) (4 pi)^(-n/4)."""
    basis = basis or HermiteBasis(n)
    if basis.n != n:
        raise ValueError("basis dimension does not match n")
    return basis.c0, basis.c2


def hermite_cubic_moment(basis: HermiteBasis) -> float:
    """The integral of H_2^3 rho over R^n, by quadrature.

    The closed form is 64 n c2^3 (4 pi)^(n/2), since |y|^2 / 2 is chi-squared
    with n degrees of freedom under the normalised weight.
    """
    return basis.inner(basis.H2() ** 2, basis.H2())


def _as_values(f: Any, basis: HermiteBasis) -> np.ndarray:
    if callable(f):
        return np.asarray(f(basis.nodes), dtype=float) * np.ones_like(basis.nodes)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full_like(basis.nodes, float(arr))
    if arr.shape != basis.nodes.shape:
        raise ValueError(f"grid mismatch: got {arr.shape[0]} values for {basis.nodes.size} quadrature nodes")
    return arr


def weighted_inner(fa: Any, fb: Any, basis: HermiteBasis) -> float:
    """(fa, fb) in L^2_rho for radial functions (callables of |y|, scalars or node values)."""
    return basis.inner(_as_values(fa, basis), _as_values(fb, basis))


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimilarityFrame:
    """One snapshot in similarity variables, sampled on a radial y-grid starting at 0."""

    s: float
    y: np.ndarray
    w: np.ndarray
    n: int
    p: float
    t: float = math.nan
    T_hat: float = math.nan
    psi: float = math.nan
    snapshot_index: int = -1
    core_nodes: int = 0
    domain_edge: float = math.inf

    @property
    def phi(self) -> np.ndarray:
        return 1.0 - self.w

    @property
    def boundary_weight(self) -> float:
        """rho at the image of the domain boundary (size of the truncation layer)."""
        return math.exp(-0.25 * self.domain_edge**2) if math.isfinite(self.domain_edge) else 0.0

    def phi_on(self, y: np.ndarray) -> np.ndarray:
        return 1.0 - PchipInterpolator(self.y, self.w, extrapolate=False)(y)

    def phi_grad(self) -> np.ndarray:
        """Radial derivative of phi on the frame grid (fourth-order stencils)."""
        return -radial_derivative(self.y, self.w)


def to_similarity(
    record,
    index: int,
    Y_max: float = 12.0,
    T_hat: float | None = None,
    table: ResolventTable | None = None,
    min_core_nodes: int = 200,
    core_radius: float = 4.0,
) -> SimilarityFrame:
    """Rescale snapshot ``index`` of a run to similarity variables.

    w is divided by psi(t) = G_inv(T_hat - t) and set to 0 beyond the image
    of the domain, so every frame covers [0, Y_max].
    """
    if T_hat is None:
        if record.estimate is None:
            raise ValueError("record has no blow-up estimate")
        T_hat = record.estimate.T_hat
    snap = record.snapshots[index]
    tau = T_hat - snap.t
    if not tau > 0:
        raise ValueError(f"snapshot time {snap.t:.17g} is not before T_hat = {T_hat:.17g}")
    spec = record.config.spec
    table = table or default_table(spec)
    psi = float(G_inv(table, tau))
    scale = math.sqrt(tau)
    y = snap.r / scale
    core = int(np.count_nonzero(y <= core_radius))
    if core < min_core_nodes:
        raise UnresolvedCoreError(f"only {core} nodes inside |y| <= {core_radius:g} (need {min_core_nodes})")
    w = snap.u / psi
    edge = float(y[-1])
    keep = y <= Y_max
    y_f, w_f = y[keep], w[keep]
    if edge < Y_max:
        # Zero extension beyond the domain image; y[-1] already carries u = 0.
        pad = np.linspace(edge, Y_max, 9)[1:]
        y_f = np.concatenate([y_f, pad])
        w_f = np.concatenate([w_f, np.zeros(pad.size)])
    elif y_f[-1] < Y_max:
        w_end = float(PchipInterpolator(y, w)(Y_max))
        y_f = np.append(y_f, Y_max)
        w_f = np.append(w_f, w_end)
    return SimilarityFrame(
        s=-math.log(tau),
        y=y_f,
        w=w_f,
        n=int(record.config.n),
        p=float(spec.p),
        t=float(snap.t),
        T_hat=float(T_hat),
        psi=psi,
        snapshot_index=int(index),
        core_nodes=core,
        domain_edge=edge,
    )


def synthetic_frame(basis: HermiteBasis, s: float, p: float, phi: Callable[[np.ndarray], np.ndarray]) -> SimilarityFrame:
    """A frame with prescribed phi sampled at 0, the quadrature nodes and Y_max.

    Because the quadrature nodes are frame nodes, projections of synthetic
    frames involve no interpolation error.
    """
    y = np.concatenate([[0.0], basis.nodes, [basis.Y_max]])
    w = 1.0 - np.asarray(phi(y), dtype=float) * np.ones_like(y)
    return SimilarityFrame(s=float(s), y=y, w=w, n=basis.n, p=float(p))


def select_frames(
    record,
    Y_max: float = 12.0,
    T_hat: float | None = None,
    tau_margin: float = 1e3,
    min_core_nodes: int = 200,
    table: ResolventTable | None = None,
    skipped: list[int] | None = None,
) -> list[SimilarityFrame]:
    """Frames usable for spectral analysis.

    A snapshot qualifies when the domain image covers [0, Y_max]
    (R / sqrt(T_hat - t) >= Y_max), when T_hat - t exceeds ``tau_margin``
    times the blow-up time uncertainty (so that s is meaningful), and when
    the core is resolved.  Indices of snapshots rejected only because the
    core is unresolved are appended to ``skipped`` when it is given.
    """
    if record.estimate is None:
        raise ValueError("record has no blow-up estimate")
    est = record.estimate
    T = est.T_hat if T_hat is None else T_hat
    unc = max(est.spread, 4 * np.finfo(float).eps * est.T_hat)
    R = record.config.R
    frames = []
    for k, snap in enumerate(record.snapshots):
        tau = T - snap.t
        if not tau > tau_margin * unc or R / math.sqrt(tau) < Y_max:
            continue
        try:
            frames.append(to_similarity(record, k, Y_max, T, table, min_core_nodes))
        except UnresolvedCoreError:
            if skipped is not None:
                skipped.append(k)
    return frames


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralCoefficients:
    """Coefficients of phi = a H_0 + b H_2 + theta at similarity time s."""

    s: float
    a: float
    b: float
    theta_norm: float
    theta_grad_norm: float
    phi_norm: float
    pythagoras_defect: float

    def as_row(self, target: float) -> dict[str, float]:
        return {
            "s": self.s,
            "a": self.a,
            "b": self.b,
            "theta_norm": self.theta_norm,
            "theta_grad_norm": self.theta_grad_norm,
            "s_b": self.s * self.b,
            "target": target,
        }


def _frame_on_basis(frame: SimilarityFrame, basis: HermiteBasis) -> tuple[np.ndarray, np.ndarray]:
    if frame.n != basis.n:
        raise ValueError("frame and basis dimensions differ")
    if frame.y[-1] < basis.Y_max * (1 - 1e-14):
        raise ValueError(f"quadrature support [0, {basis.Y_max:g}] exceeds frame support [0, {frame.y[-1]:.6g}]")
    phi = frame.phi_on(basis.nodes)
    grad = PchipInterpolator(frame.y, frame.phi_grad(), extrapolate=False)(basis.nodes)
    return phi, grad


def project(frame: SimilarityFrame, basis: HermiteBasis, check: bool = True, tol: float = 1e-8) -> SpectralCoefficients:
    """Orthogonal decomposition of phi onto H_0, H_2 and the remainder theta.

    With ``check`` the Pythagoras identity |phi|^2 = a^2 + b^2 + |theta|^2 is
    enforced to relative ``tol``.
    """
    phi, grad = _frame_on_basis(frame, basis)
    h0, h2 = basis.H0(), basis.H2()
    a = basis.inner(phi, h0)
    b = basis.inner(phi, h2)
    theta = phi - a * h0 - b * h2
    theta_grad = grad - b * basis.dH2()
    phi2 = basis.inner(phi, phi)
    th2 = basis.inner(theta, theta)
    defect = abs(phi2 - (a * a + b * b + th2)) / max(phi2, 1e-300)
    if check and phi2 > 0 and defect > tol:
        raise ArithmeticError(f"Pythagoras identity violated: relative defect {defect:.3g}")
    return SpectralCoefficients(
        s=frame.s,
        a=a,
        b=b,
        theta_norm=math.sqrt(th2),
        theta_grad_norm=basis.norm(theta_grad),
        phi_norm=math.sqrt(phi2),
        pythagoras_defect=defect,
    )


def _frames_of(source, basis: HermiteBasis, **kw) -> list[SimilarityFrame]:
    if isinstance(source, (list, tuple)):
        return list(source)
    return select_frames(source, Y_max=basis.Y_max, **kw)


@dataclass(frozen=True, eq=False)
class NeutralModeTrack:
    """s b(s) along a frame series against its predicted limit 1 / (4 p c2)."""

    s: np.ndarray
    sb: np.ndarray
    target: float
    coefficients: tuple
    final_gap: float
    shrinking: bool

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(np.abs(self.sb) / self.target - 1.0)


def neutral_mode_track(source, basis: HermiteBasis, min_frames: int = 8, min_span: float = 3.0, **kw) -> NeutralModeTrack:
    """Track s b(s) over frames (a frame list or a run record).

    ``final_gap`` is | |s b| / target - 1 | at the last frame; ``shrinking``
    holds when the gap at the last frame is below the gap at the first frame
    of the last half.
    """
    frames = _frames_of(source, basis, **kw)
    if len(frames) < min_frames:
        raise InsufficientFramesError(f"{len(frames)} frames (need {min_frames})")
    s = np.array([f.s for f in frames])
    if s[-1] - s[0] < min_span:
        raise InsufficientFramesError(f"frames span ds = {s[-1] - s[0]:.3g} (need {min_span:g})")
    p = frames[0].p
    coeffs = tuple(project(f, basis) for f in frames)
    sb = np.array([c.s * c.b for c in coeffs])
    target = 1.0 / (4.0 * p * basis.c2)
    gaps = np.abs(np.abs(sb) / target - 1.0)
    half = len(frames) // 2
    return NeutralModeTrack(
        s=s,
        sb=sb,
        target=target,
        coefficients=coeffs,
        final_gap=float(gaps[-1]),
        shrinking=bool(gaps[-1] < gaps[half]),
    )


def theorem1_residual(frame: SimilarityFrame, R: float = 2.0, basis: HermiteBasis | None = None) -> tuple[float, float]:
    """s sup_{|y|<=R} |phi - (|y|^2 - 2n)/(4ps)| and s times the same residual in H^1_rho."""
    if R > frame.y[-1]:
        raise ValueError("R exceeds the frame support")
    n, p, s = frame.n, frame.p, frame.s
    # Frame nodes inside the ball plus the rim |y| = R itself.
    yy = np.append(frame.y[frame.y < R], R)
    limit = (yy * yy - 2 * n) / (4 * p * s)
    sup = s * float(np.max(np.abs(frame.phi_on(yy) - limit)))
    basis = basis or HermiteBasis(n)
    phi, grad = _frame_on_basis(frame, basis)
    y = basis.nodes
    res = phi - (y * y - 2 * n) / (4 * p * s)
    res_grad = grad - 2 * y / (4 * p * s)
    h1 = s * math.sqrt(basis.inner(res, res) + basis.inner(res_grad, res_grad))
    return sup, h1


def h_of_s(spec: NonlinearitySpec, table: ResolventTable, s: float | np.ndarray) -> np.ndarray | float:
    """h(s) = e^(-s) psi1^(p-1) L(psi1), psi1 = G_inv(e^(-s)); tends to 1/(p-1)."""
    s_arr = np.asarray(s, dtype=float)
    Y = np.exp(-s_arr)
    if np.any(Y > table.G_vals[0]):
        raise ValueError("e^(-s) exceeds G(X_lo): s below the inversion range")
    psi1 = np.asarray(G_inv(table, Y), dtype=float)
    L = spec.L_derivs(psi1)[0]
    out = Y * psi1 ** (spec.p - 1) * L
    return float(out) if np.ndim(s) == 0 else out


# ---------------------------------------------------------------------------
# Weighted Poincare inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyGaussTrial:
    """Radial trial v(y) = sum_k coeffs[k] |y|^k exp(-decay |y|^2)."""

    coeffs: tuple[float, ...]
    decay: float = 0.125

    def derivs(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """v, v' and v'' in the radial variable."""
        P = np.polynomial.Polynomial(self.coeffs)
        P1, P2 = P.deriv(1), P.deriv(2)
        g = np.exp(-self.decay * r * r)
        g1 = -2 * self.decay * r
        g2 = g1 * g1 - 2 * self.decay
        v = P(r) * g
        v1 = (P1(r) + P(r) * g1) * g
        v2 = (P2(r) + 2 * P1(r) * g1 + P(r) * g2) * g
        return v, v1, v2

    @property
    def smooth(self) -> bool:
        """Only even powers of |y|, so v is smooth at the origin."""
        return all(c == 0 for c in self.coeffs[1::2])


def poincare_check(trial: PolyGaussTrial, basis: HermiteBasis) -> dict[str, float | None]:
    """Margins of the weighted Poincare inequalities (nonnegative when they hold).

    * ``moment``: 16 |grad v|^2 + 4n |v|^2 - int |y|^2 v^2 rho.
    * ``mean``: |grad v|^2 + vbar^2 - |v|^2 with vbar = (v, H_0).
    * ``two_mode``: |grad v|^2 / 2 - |v|^2 after removing the span of 1 and |y|^2.
    * ``hessian``: |grad d_1 v|^2 - |d_1 v|^2 after removing |y|^2 - 2n; None
      unless the trial is smooth at the origin.
    """
    n = basis.n
    y = basis.nodes
    v, v1, v2 = trial.derivs(y)
    ip = basis.inner
    out: dict[str, float | None] = {}
    out["moment"] = 16 * ip(v1, v1) + 4 * n * ip(v, v) - ip(y * y * v, v)
    h0, h2, dh2 = basis.H0(), basis.H2(), basis.dH2()
    vbar = ip(v, h0)
    out["mean"] = ip(v1, v1) + vbar**2 - ip(v, v)
    # Gram-Schmidt against span{1, |y|^2} = span{H_0, H_2}.
    a, b = ip(v, h0), ip(v, h2)
    u, u1 = v - a * h0 - b * h2, v1 - b * dh2
    out["two_mode"] = 0.5 * ip(u1, u1) - ip(u, u)
    if trial.smooth:
        b = ip(v, h2)
        z1 = v1 - b * dh2
        z2 = v2 - b * 2.0 * basis.c2
        # For radial z: |d_1 z|^2 = |z'|^2 / n and
        # |grad d_1 z|^2 = int (z''^2 / n + (n-1)/n (z'/r)^2) rho.
        hess = z2 * z2 / n + (n - 1) / n * (z1 / y) ** 2
        out["hessian"] = float(np.sum(basis.weights * hess)) - ip(z1, z1) / n
    else:
        out["hessian"] = None
    return out


# ---------------------------------------------------------------------------
# Lower decay bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LowerDecay:
    """s |phi(s)| over a frame series with its lower-bound verdict."""

    s: np.ndarray
    s_phi_norm: np.ndarray
    lower_bound: float
    decay_rate: float
    passed: bool


def lower_decay_check(source, basis: HermiteBasis, min_frames: int = 5, **kw) -> LowerDecay:
    """Whether s |phi(s)| stays bounded below over the last half of frames.

    The verdict requires the series on the last half to stay within
    [0.1, 10] times its final value and its fitted exponential rate
    d log(s |phi|) / ds to exceed -1/2.  Exponential decay at rate 1/2 or
    faster is what the first stable eigenvalue of the Hermite operator
    would produce, so a slower fitted rate separates polynomial decay of
    phi from exponential decay.
    """
    frames = _frames_of(source, basis, **kw)
    if len(frames) < min_frames:
        raise InsufficientFramesError(f"{len(frames)} frames (need {min_frames})")
    s = np.array([f.s for f in frames])
    vals = np.array([f.s * project(f, basis).phi_norm for f in frames])
    last = slice(len(frames) // 2, None)
    tail_s, tail_v = s[last], vals[last]
    final = vals[-1]
    if final > 0 and np.all(tail_v > 0) and tail_s.size >= 2 and np.ptp(tail_s) > 0:
        rate = float(np.polyfit(tail_s, np.log(tail_v), 1)[0])
    else:
        rate = -math.inf
    bounded = bool(final > 0 and np.all(tail_v >= 0.1 * final) and np.all(tail_v <= 10 * final))
    return LowerDecay(
        s=s,
        s_phi_norm=vals,
        lower_bound=float(np.min(tail_v)),
        decay_rate=rate,
        passed=bounded and rate > -0.5,
    )


# ---------------------------------------------------------------------------
# Sensitivity to the blow-up time
# ---------------------------------------------------------------------------


def uncertainty_band(
    record,
    quantity: Callable[[list[SimilarityFrame]], np.ndarray],
    Y_max: float = 12.0,
    **kw,
) -> dict[str, Any]:
    """Evaluate ``quantity(frames)`` at T_hat and T_hat +- spread.

    Frames are selected once (at T_hat) and rebuilt from the same snapshots
    for the shifted blow-up times, so the three series are aligned.
    """
    est = record.estimate
    base = select_frames(record, Y_max=Y_max, **kw)
    idx = [f.snapshot_index for f in base]
    central = np.asarray(quantity(base), dtype=float)
    out = {"T_hat": est.T_hat, "spread": est.spread, "central": central}
    for tag, T in (("lower", est.T_hat - est.spread), ("upper", est.T_hat + est.spread)):
        frames = [to_similarity(record, k, Y_max, T_hat=T, min_core_nodes=0) for k in idx]
        out[tag] = np.asarray(quantity(frames), dtype=float)
    out["band"] = np.maximum(np.abs(out["upper"] - central), np.abs(out["lower"] - central))
    return out
