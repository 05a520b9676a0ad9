"""Nonlinearity families: closed-form derivatives, diagnostics and config round trips."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowup_lab.nonlinearity import (
    FAMILIES,
    DerivativeUndefinedError,
    DomainError,
    ExpLogCos,
    ExpLogPow,
    IteratedLog,
    LogPower,
    NonlinearityError,
    NonlinearitySpec,
    OscillatingLogSin,
    PurePower,
    SinLogPow,
    aux_convexity_check,
    catalogue,
    eval_f,
    eval_L,
    karamata_interval,
    karamata_ratio_bound,
    locate_M,
    slow_variation_index,
    sobolev_exponent,
    spec_from_config,
    spec_to_config,
    validate_hypotheses,
)

CATALOGUE = catalogue(2.0)
LADDER = [math.exp(k) for k in range(10, 61, 5)]


def _oracle_L(spec: NonlinearitySpec, s: float) -> float:
    """L evaluated independently with the math module."""
    fam = spec.family
    if isinstance(fam, PurePower):
        return 1.0
    if isinstance(fam, LogPower):
        return math.log(fam.K + s) ** fam.a
    if isinstance(fam, IteratedLog):
        v = fam.K + s
        for _ in range(fam.m):
            v = math.log(v)
        return v
    if isinstance(fam, ExpLogPow):
        return math.exp(abs(math.log(s)) ** fam.nu)
    if isinstance(fam, OscillatingLogSin):
        lg = math.log(3.0 + s)
        return lg ** math.sin(math.log(lg))
    if isinstance(fam, ExpLogCos):
        x = abs(math.log(s))
        return math.exp(x**fam.nu * math.cos(x**fam.gamma))
    if isinstance(fam, SinLogPow):
        return 1.0 + fam.a * math.sin(math.log(2.0 + s) ** fam.nu)
    raise AssertionError(fam)


def _central(fun, s: float) -> float:
    h = s * 1e-6
    return (fun(s + h) - fun(s - h)) / (2.0 * h)


def _points(spec: NonlinearitySpec, log_s: float) -> float:
    return max(spec.s_min * 1.01, 1.5) * math.exp(log_s)


class TestClosedForms:
    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    @pytest.mark.parametrize("s", [1.7, 12.0, 3.3e4, 1e9, 1e30, 1e120])
    def test_L_matches_independent_evaluation(self, spec, s):
        s = max(s, spec.s_min)
        np.testing.assert_allclose(eval_L(spec, s)[0], _oracle_L(spec, s), rtol=1e-13)

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_f_is_power_times_L(self, spec):
        s = np.geomspace(max(spec.s_min, 1.0), 1e50, 40)
        want = np.array([x**spec.p * _oracle_L(spec, x) for x in s])
        np.testing.assert_allclose(spec.f(s), want, rtol=1e-12)
        np.testing.assert_allclose(spec.log_f(s), np.log(want), rtol=1e-13)

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    @given(log_s=st.floats(0.0, 120.0))
    def test_derivatives_match_central_differences(self, spec, log_s):
        s = _points(spec, log_s)
        L, L1, L2 = eval_L(spec, s)
        f0, f1, f2 = eval_f(spec, s)
        # Relative errors against each derivative's natural scale (L/s and L/s^2,
        # f/s and f/s^2), so sign changes of oscillating factors stay well posed.
        Lfun = lambda x: float(eval_L(spec, x)[0])
        L1fun = lambda x: float(eval_L(spec, x)[1])
        ffun = lambda x: float(eval_f(spec, x, derivatives=False))
        f1fun = lambda x: float(eval_f(spec, x)[1])
        assert abs(_central(Lfun, s) - L1) <= 1e-5 * max(abs(L1), 1e-3 * L / s)
        assert abs(_central(L1fun, s) - L2) <= 1e-5 * max(abs(L2), 1e-3 * L / s**2)
        assert abs(_central(ffun, s) - f1) <= 1e-5 * abs(f1)
        assert abs(_central(f1fun, s) - f2) <= 1e-5 * abs(f2)

    def test_pure_power_diagnostics_vanish(self):
        spec = NonlinearitySpec(2.5)
        for s in LADDER:
            d = slow_variation_index(spec, s)
            assert d.eta1 == 0.0 and d.eta2 == 0.0
            assert d.weighted1 == 0.0 and d.weighted2 == 0.0

    def test_log_power_eta1_closed_form(self):
        spec = NonlinearitySpec(2.0, LogPower(K=2.0, a=1.0))
        s = math.exp(20.0)
        want = s / ((2.0 + s) * math.log(2.0 + s))
        np.testing.assert_allclose(slow_variation_index(spec, s).eta1, want, rtol=1e-13)


class TestDomain:
    def test_negative_argument_rejected(self):
        with pytest.raises(DomainError):
            eval_f(NonlinearitySpec(2.0), -1.0)

    def test_derivatives_below_threshold_rejected(self):
        spec = NonlinearitySpec(2.0, ExpLogPow(nu=0.3))
        assert spec.s_min == pytest.approx(math.e)
        with pytest.raises(DerivativeUndefinedError):
            eval_f(spec, 1.0)
        assert eval_f(spec, 1.0, derivatives=False) > 0

    def test_second_derivative_at_zero_for_small_p(self):
        with pytest.raises(DerivativeUndefinedError):
            eval_f(NonlinearitySpec(1.5), 0.0)

    def test_continuation_is_c1_at_threshold(self):
        spec = NonlinearitySpec(2.0, ExpLogCos(nu=0.15, gamma=0.2))
        s0 = spec.s_min
        below = float(spec.f(s0 * (1 - 1e-9)))
        above = float(spec.f(s0))
        np.testing.assert_allclose(below, above, rtol=1e-8)
        slope_lo = (spec.f(s0) - spec.f(s0 * (1 - 1e-6))) / (s0 * 1e-6)
        np.testing.assert_allclose(slope_lo, spec.f_derivs(np.array(s0))[1], rtol=1e-5)
        assert float(spec.f(0.0)) >= 0.0

    def test_negative_log_exponent_threshold(self):
        spec = NonlinearitySpec(2.0, LogPower(K=1.5, a=-1.0))
        assert spec.s_min == pytest.approx(math.e - 1.5)

    @pytest.mark.parametrize(
        "family, fragment",
        [
            (LogPower(K=1.0), "K must exceed 1"),
            (IteratedLog(m=2, K=2.0), "K must exceed"),
            (ExpLogPow(nu=0.6), "nu must lie"),
            (ExpLogCos(nu=0.3, gamma=0.3), "nu + gamma"),
            (SinLogPow(a=1.2), "|a| must be below 1"),
        ],
    )
    def test_constraint_violations(self, family, fragment):
        with pytest.raises(NonlinearityError, match=fragment.replace("|", r"\|").replace("+", r"\+")):
            NonlinearitySpec(2.0, family)

    def test_p_must_exceed_one(self):
        with pytest.raises(NonlinearityError, match="exponent p must exceed 1"):
            NonlinearitySpec(1.0)


class TestHypotheses:
    def test_subcritical_pass(self):
        assert validate_hypotheses(NonlinearitySpec(2.0), n=3).entries["p_range"]

    def test_supercritical_fail(self):
        rep = validate_hypotheses(NonlinearitySpec(6.0), n=3)
        assert sobolev_exponent(3) == 5.0
        assert not rep.entries["p_range"] and not rep.passed

    def test_inadmissible_parameters_reported(self):
        spec = NonlinearitySpec(2.0, ExpLogCos(nu=0.3, gamma=0.3), enforce_constraints=False)
        rep = validate_hypotheses(spec, n=1)
        assert not rep.entries["parameter_constraints"]
        assert "nu + gamma" in rep.notes["parameter_constraints"]

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_weighted_diagnostics_decay_on_ladder(self, spec):
        rep = validate_hypotheses(spec, n=1)
        assert rep.passed, rep.as_dict()
        w1 = np.array([slow_variation_index(spec, s).weighted1 for s in LADDER])
        w2 = np.array([slow_variation_index(spec, s).weighted2 for s in LADDER])
        assert np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))


class TestKaramata:
    def test_interval_endpoints(self):
        lo, hi = karamata_interval(math.exp(50.0), 0.6)
        h = 50.0**0.6 / 8.0
        np.testing.assert_allclose([lo, hi], [math.exp(-h), math.exp(h)], rtol=1e-15)

    def test_random_sample_of_pairs(self):
        rng = np.random.default_rng(20240601)
        worst = math.inf
        for _ in range(1000):
            spec = CATALOGUE[rng.integers(len(CATALOGUE))]
            s = math.exp(rng.uniform(50.0, 200.0))
            lo, hi = karamata_interval(s)
            lam = math.exp(rng.uniform(math.log(lo), math.log(hi)))
            worst = min(worst, karamata_ratio_bound(spec, s, lam))
        assert worst >= 0.0

    @given(idx=st.integers(0, len(CATALOGUE) - 1), log_s=st.floats(50.0, 600.0), frac=st.floats(-1.0, 1.0))
    def test_margin_nonnegative(self, idx, log_s, frac):
        s = math.exp(log_s)
        lo, hi = karamata_interval(s)
        lam = math.exp(frac * math.log(hi))
        assert karamata_ratio_bound(CATALOGUE[idx], s, lam) >= 0.0

    def test_lambda_outside_interval_rejected(self):
        s = math.exp(50.0)
        with pytest.raises(ValueError, match="outside"):
            karamata_ratio_bound(NonlinearitySpec(2.0), s, 10 * karamata_interval(s)[1])


class TestAuxConvexity:
    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    @pytest.mark.parametrize("A", [0.0, 1.0, 25.0])
    def test_convex_past_gate(self, spec, A):
        M = locate_M(spec)
        for s in M * np.geomspace(1.0, 1e40, 25):
            phi, F, F1, F2 = aux_convexity_check(spec, A, float(s))
            f1 = float(spec.f_derivs(np.array(s))[1])
            assert abs(F1 - f1 * phi * (1 - phi)) <= 1e-10 * abs(F1)
            scale = abs(spec.f_derivs(np.array(s))[2]) * phi
            assert F2 >= -1e-12 * scale

    def test_closed_form_pure_power(self):
        # F = s^p / (A + p log s): F'' by hand.
        p, A, s = 2.0, 1.0, 50.0
        phi, F, F1, F2 = aux_convexity_check(NonlinearitySpec(p), A, s)
        D = A + p * math.log(s)
        want1 = p * s ** (p - 1) / D - p * s ** (p - 1) / D**2
        want2 = (p * (p - 1) * s ** (p - 2)) * (1 / D - 1 / D**2) + p * s ** (p - 1) * (-p / s / D**2 + 2 * p / s / D**3)
        np.testing.assert_allclose([F, F1, F2], [s**p / D, want1, want2], rtol=1e-13)

    def test_outside_gate_rejected(self):
        with pytest.raises(NonlinearityError):
            aux_convexity_check(NonlinearitySpec(2.0), 0.0, 2.0)


class TestConfigRoundTrip:
    @given(
        key=st.sampled_from(sorted(FAMILIES)),
        p=st.floats(1.05, 6.0),
    )
    def test_round_trip(self, key, p):
        spec = next(s for s in catalogue(p) if s.name == key)
        again = spec_from_config({k: str(v) for k, v in spec_to_config(spec).items()})
        assert again == spec

    def test_example_section(self):
        spec = spec_from_config({"family": '"log_power"', "p": "2.0", "K": "2.0", "a": "1.0"})
        assert spec == NonlinearitySpec(2.0, LogPower(K=2.0, a=1.0))
        assert spec_to_config(spec) == {"family": "log_power", "p": 2.0, "K": 2.0, "a": 1.0}

    def test_missing_and_unknown_keys(self):
        with pytest.raises(KeyError):
            spec_from_config({"p": 2})
        with pytest.raises(ValueError, match="^q:"):
            spec_from_config({"family": "log_power", "p": 2, "q": 1})
        with pytest.raises(ValueError, match="^family:"):
            spec_from_config({"family": "cubic", "p": 2})
