"""Resolvent G, companion H, inverses and the ODE blow-up solution."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from blowup_lab.nonlinearity import LogPower, NonlinearitySpec, catalogue, locate_M
from blowup_lab.resolvent import (
    G,
    G_inv,
    G_tail,
    H,
    H_closed_form_pure_power,
    H_inv,
    RangeError,
    build_table,
    check_asymptotics,
    default_h_table,
    default_table,
    ginv_asymptotic,
    ode_integrate,
    psi,
)

CATALOGUE = catalogue(2.0)


def _quad_tail(fun, X):
    """int_X^inf fun(s) ds by scipy, in the variable v = log s.

    The integrand decays like exp(-(p - 1) v), so truncating at v = log X + 250
    drops less than exp(-100) relative for p >= 1.4.
    """
    lo = math.log(X)
    val, _ = quad(lambda v: fun(math.exp(v)) * math.exp(v), lo, lo + 250.0, epsabs=0.0, epsrel=1e-13, limit=500)
    return val


class TestPurePowerOracle:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.5])
    @given(log10X=st.floats(0.0, 39.0))
    def test_G_closed_form(self, p, log10X):
        X = 10.0**log10X
        table = default_table(NonlinearitySpec(p))
        assert abs(float(G(table, X)) * (p - 1) * X ** (p - 1) - 1.0) < 1e-10

    @pytest.mark.parametrize("p, A", [(2.0, 0.0), (3.0, 2.0), (1.7, 10.0)])
    def test_H_closed_form_is_the_integral(self, p, A):
        for X in (3.0, 1e3, 1e7):
            ref = _quad_tail(lambda s: (A + p * math.log(s)) * s ** -p, X)
            np.testing.assert_allclose(H_closed_form_pure_power(p, A, X), ref, rtol=1e-11)

    @pytest.mark.parametrize("p, A", [(2.0, 0.0), (3.0, 2.0)])
    @given(log10X=st.floats(0.5, 30.0))
    def test_H_matches_closed_form(self, p, A, log10X):
        X = 10.0**log10X
        got = H(NonlinearitySpec(p), A, X)
        assert abs(got / H_closed_form_pure_power(p, A, X) - 1.0) < 1e-9

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_inverse_asymptotic_is_exact(self, p):
        table = default_table(NonlinearitySpec(p))
        Y = np.geomspace(1e-12, 0.4, 30)
        np.testing.assert_allclose(ginv_asymptotic(NonlinearitySpec(p), Y), G_inv(table, Y), rtol=1e-10)


class TestGeneralFamilies:
    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_G_against_scipy(self, spec):
        table = default_table(spec)
        for X in (table.X_lo * 1.3, 55.0, 1e6, 1e15, 1e33):
            ref = _quad_tail(lambda s: 1.0 / float(spec.f(s)), X)
            np.testing.assert_allclose(float(G(table, X)), ref, rtol=1e-10)

    def test_H_against_scipy(self):
        spec = NonlinearitySpec(2.0, LogPower(K=2.0, a=1.0))
        A = 1.5
        for X in (10.0, 1e5, 1e12):
            ref = _quad_tail(lambda s: (A + float(spec.log_f(s))) / float(spec.f(s)), X)
            np.testing.assert_allclose(H(spec, A, X), ref, rtol=1e-10)

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_direct_tail_agrees_with_table(self, spec):
        table = default_table(spec)
        for X in (20.0, 1e10, 1e50):
            np.testing.assert_allclose(G_tail(spec, X), float(G(table, X)), rtol=1e-11)

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    @given(a=st.floats(0.0, 80.0), b=st.floats(0.0, 80.0))
    def test_strictly_decreasing(self, spec, a, b):
        if a == b:
            return
        lo, hi = sorted((a, b))
        table = default_table(spec)
        X1, X2 = table.X_lo * math.exp(lo), table.X_lo * math.exp(hi)
        if X2 / X1 - 1 < 1e-12:
            return
        assert float(G(table, X1)) > float(G(table, X2))
        M = locate_M(spec)
        assert H(spec, 1.0, M * math.exp(lo)) > H(spec, 1.0, M * math.exp(hi))

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    @given(u=st.floats(0.0, 1.0))
    def test_round_trips(self, spec, u):
        table = default_table(spec)
        X = table.X_lo * (table.X_hi / table.X_lo) ** u
        assert abs(float(G_inv(table, G(table, X))) / X - 1.0) < 1e-9
        htab = default_h_table(spec, 1.0)
        Xh = htab.X_lo * (htab.X_hi / htab.X_lo) ** u
        assert abs(float(H_inv(spec, 1.0, H(spec, 1.0, Xh))) / Xh - 1.0) < 1e-9

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_derivative_consistency(self, spec):
        table = default_table(spec)
        X = table.X_grid[1:-1:37]
        h = X * 1e-5
        dG = (np.asarray(G(table, X + h)) - np.asarray(G(table, X - h))) / (2 * h)
        np.testing.assert_allclose(dG, -1.0 / spec.f(X), rtol=1e-6)
        np.testing.assert_allclose(table.derivative(X), -1.0 / spec.f(X), rtol=1e-12)

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_equivalence_stability_trend(self, spec):
        rep = check_asymptotics(spec)
        assert rep.verdicts["equivGG"], rep.series["equivGG"]


class TestRangeErrors:
    def test_inverse_outside_range(self):
        table = default_table(NonlinearitySpec(2.0))
        with pytest.raises(RangeError):
            G_inv(table, 2.0 * table.G_vals[0])

    def test_psi_after_blowup(self):
        table = default_table(NonlinearitySpec(2.0))
        with pytest.raises(RangeError):
            psi(table, 0.5, 0.5)

    def test_negative_A(self):
        with pytest.raises(ValueError):
            H(NonlinearitySpec(2.0), -1.0, 10.0)

    def test_G_refuses_H_table(self):
        with pytest.raises(TypeError):
            G(default_h_table(NonlinearitySpec(2.0), 1.0), 10.0)


class TestTableExport:
    def test_rows_and_summary(self):
        table = build_table(NonlinearitySpec(2.0), X_lo=1.0, X_hi=1e10)
        rows = table.to_rows()
        assert len(rows) == table.X_grid.size
        X, Gv, err = np.array(rows).T
        assert np.all(np.diff(X) > 0) and np.all(np.diff(Gv) < 0)
        np.testing.assert_allclose(Gv, 1.0 / X, rtol=1e-12)
        assert np.all(err >= 0)
        summ = table.summary()
        assert summ["X_lo"] == 1.0 and summ["X_hi"] == 1e10
        # 64 nodes per decade.
        assert len(rows) == 10 * 64 + 1


class TestOdeIntegrate:
    def test_p2_exact_solution(self):
        tr = ode_integrate(NonlinearitySpec(2.0), 1.0, stop_value=1e12)
        assert abs(tr.T_hat - 1.0) < 1e-8
        # Compare times at which psi is reached: t(psi) = 1 - 1/psi is well
        # conditioned, psi(t) near t = 1 is not.
        np.testing.assert_allclose(tr.t, 1.0 - 1.0 / tr.psi, rtol=0, atol=1e-10)

    def test_p3_blowup_time(self):
        tr = ode_integrate(NonlinearitySpec(3.0), 1.0)
        assert abs(tr.T_hat - 0.5) < 1e-8

    def test_log_power_cross_check(self):
        tr = ode_integrate(NonlinearitySpec(2.0, LogPower(K=2.0, a=1.0)), 10.0)
        assert tr.max_deviation < 1e-6

    @pytest.mark.parametrize("spec", CATALOGUE, ids=lambda s: s.name)
    def test_monotone_and_residual(self, spec):
        tr = ode_integrate(spec, max(10.0, spec.s_min), stop_value=1e9)
        assert np.all(np.diff(tr.psi) > 0)
        # psi' = f(psi): the secant slope lies between f at both ends (f increasing).
        slope = np.diff(tr.psi) / np.diff(tr.t)
        f = spec.f(tr.psi)
        assert np.all(slope >= f[:-1] * (1 - 1e-9)) and np.all(slope <= f[1:] * (1 + 1e-9))

    def test_invalid_start(self):
        with pytest.raises(RangeError):
            ode_integrate(NonlinearitySpec(2.0), 10.0, stop_value=5.0)
