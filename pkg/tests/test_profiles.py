"""Profile formulas, their pure-power closed forms and run comparisons."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowup_lab.nonlinearity import NonlinearitySpec, catalogue, locate_M
from blowup_lab.pde_solver import BlowupEstimate, RunConfig, RunRecord, SolutionState
from blowup_lab.profiles import (
    PROFILE_KINDS,
    ProfilePrediction,
    Window,
    building_block,
    explicit_profile,
    final_profile,
    global_profile,
    global_trend,
    spacetime_profile,
    upper_H_profile,
    verify_against_run,
)
from blowup_lab.resolvent import G_inv, H, default_h_table, default_table, psi


def _closed_form_global(p, T, x, t, coef=None):
    coef = (p - 1) / (8 * p) if coef is None else coef
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        space = np.where(ax > 0, coef * ax**2 / np.abs(np.log(np.where(ax > 0, ax, 0.5))), 0.0)
    return ((p - 1) * (T - t + space)) ** (-1 / (p - 1))


def _synthetic_record(p, coef=None, T=0.05):
    r = np.concatenate([[0.0], np.geomspace(1e-6, 0.5, 300)])
    snaps = []
    for tau in np.geomspace(4e-2, 1e-6, 20):
        u = _closed_form_global(p, T, r, T - tau, coef)
        snaps.append(SolutionState(t=T - tau, r=r, u=u, dt=0.0, dt_next=0.0))
    t = np.array([s.t for s in snaps])
    m = np.array([s.m for s in snaps])
    est = BlowupEstimate(T_hat=T, t_k=t, series=t.copy(), spread=0.0, n_last=4)
    return RunRecord(RunConfig(NonlinearitySpec(p)), tuple(snaps), t, m, "blow-up", est, {}, "synthetic")


class TestBuildingBlock:
    def test_origin(self):
        assert building_block(2.0, 1.0, 0.0, 0.25) == 0.75

    def test_both_log_forms_agree(self):
        p, x = 3.0, np.array([1e-4, 0.01, 0.3, 0.9])
        other = (p - 1) / (4 * p) * x**2 / np.abs(np.log(x**2))
        np.testing.assert_allclose(building_block(p, 0.0, x, 0.0), other, rtol=1e-15)

    def test_domain(self):
        with pytest.raises(ValueError, match="below 1"):
            building_block(2.0, 1.0, 1.0, 0.0)
        with pytest.raises(ValueError, match="exceed"):
            building_block(2.0, 1.0, 0.1, 2.0)


class TestFormulas:
    @pytest.mark.parametrize("spec", catalogue(2.0), ids=lambda s: s.name)
    def test_global_at_T_is_final(self, spec):
        table = default_table(spec)
        x = np.geomspace(1e-6, 0.5, 30)
        T = 0.02
        assert np.array_equal(global_profile(table, 2.0, T, x, T), final_profile(table, 2.0, x))

    @pytest.mark.parametrize("spec", catalogue(2.0), ids=lambda s: s.name)
    def test_spacetime_at_origin_is_psi(self, spec):
        table = default_table(spec)
        T = 0.01
        for t in (0.0, 0.005, 0.0099999):
            assert spacetime_profile(table, 2.0, 0.0, t, T) == float(psi(table, T, t))

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_pure_power_closed_form_random_sample(self, p):
        rng = np.random.default_rng(7)
        table = default_table(NonlinearitySpec(p))
        T = 0.05
        x = 10.0 ** rng.uniform(-8, math.log10(0.5), 1000) * rng.choice([-1, 1], 1000)
        t = T - 10.0 ** rng.uniform(-12, math.log10(T), 1000)
        got = global_profile(table, p, T, x, t)
        np.testing.assert_allclose(got, _closed_form_global(p, T, x, t), rtol=1e-9)

    @given(lx=st.floats(-8.0, math.log10(0.45)), ltau=st.floats(-12.0, -1.4))
    def test_pure_power_closed_form_property(self, lx, ltau):
        p, T = 2.0, 0.05
        x, t = 10.0**lx, T - 10.0**ltau
        got = global_profile(default_table(NonlinearitySpec(p)), p, T, x, t)
        assert abs(got / _closed_form_global(p, T, x, t) - 1) < 1e-9

    @pytest.mark.parametrize("spec", catalogue(2.0), ids=lambda s: s.name)
    def test_explicit_over_global_trend(self, spec):
        table = default_table(spec)
        B = np.geomspace(1e-2, 1e-10, 9)
        B = B[B < table.G_vals[0]]
        dev = np.array([abs(explicit_profile(spec, 2.0, 0.0, 0.0, b) / G_inv(table, b) - 1) for b in B])
        assert dev[-1] < dev[0] or dev.max() < 1e-12

    def test_pure_power_explicit_is_exact(self):
        spec = NonlinearitySpec(3.0)
        x = np.geomspace(1e-5, 0.4, 20)
        np.testing.assert_allclose(explicit_profile(spec, 3.0, x, 0.0, 1e-3), _closed_form_global(3.0, 1e-3, x, 0.0), rtol=1e-12)

    def test_exponent_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            global_profile(default_table(NonlinearitySpec(2.0)), 3.0, 1.0, 0.1, 0.0)

    def test_outside_inversion_range(self):
        table = default_table(NonlinearitySpec(3.0))  # G(1) = 1/2
        with pytest.raises(ValueError, match="inversion range"):
            global_profile(table, 3.0, 1.0, 0.1, 0.0)

    def test_blowup_point_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            global_profile(default_table(NonlinearitySpec(2.0)), 2.0, 1.0, 0.0, 1.0)


class TestUpperH:
    SPEC = NonlinearitySpec(2.0)
    A = 5.0

    def test_origin_value(self):
        assert upper_H_profile(self.SPEC, self.A, 1e4, 0.0) == 1e4

    @given(lm=st.floats(math.log10(60.0), 30.0), x=st.floats(1e-6, 1.0))
    def test_below_final_time_variant(self, lm, x):
        M = default_h_table(self.SPEC, self.A).X_lo
        m0 = max(10.0**lm, M)
        # H decreases, so a finite m0 shifts the argument up and the bound down
        assert upper_H_profile(self.SPEC, self.A, m0, x) <= upper_H_profile(self.SPEC, self.A, math.inf, x) * (1 + 1e-12)

    def test_inverse_relation(self):
        m0 = 1e6
        x = np.array([1e-3, 0.01, 0.1])
        v = upper_H_profile(self.SPEC, self.A, m0, x)
        np.testing.assert_allclose(H(self.SPEC, self.A, v), H(self.SPEC, self.A, m0) + x * x / 4, rtol=1e-10)
        assert np.all(v < m0) and np.all(np.diff(v) < 0)

    def test_final_variant_needs_nonzero_x(self):
        with pytest.raises(ValueError):
            upper_H_profile(self.SPEC, self.A, math.inf, 0.0)


class TestPrediction:
    def test_kinds(self):
        spec = NonlinearitySpec(2.0)
        for kind in PROFILE_KINDS:
            pred = ProfilePrediction(kind, spec, T_hat=0.05, A=1.0)
            assert pred.domain

    def test_invalid(self):
        spec = NonlinearitySpec(2.0)
        with pytest.raises(ValueError, match="unknown profile kind"):
            ProfilePrediction("parabolic", spec)
        with pytest.raises(ValueError, match="need A"):
            ProfilePrediction("upper_h", spec)
        with pytest.raises(ValueError, match="m0"):
            ProfilePrediction("upper_h", spec, A=1.0).evaluate(np.array([0.1]), 0.0)


class TestRunComparison:
    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_synthetic_record_exact(self, p):
        rec = _synthetic_record(p)
        pred = ProfilePrediction("global", rec.config.spec, T_hat=0.05)
        rep = verify_against_run(rec, [pred], Window(annulus=False, x_max=0.5), keep_rows=True)[0]
        assert abs(rep.ratio_min - 1) < 1e-9 and abs(rep.ratio_max - 1) < 1e-9
        assert rep.rows.shape == (rep.n_points, 5) and rep.n_snapshots == 20

    def test_wrong_constant_detected(self):
        rec = _synthetic_record(2.0, coef=(2.0 - 1) / (4 * 2.0))
        pred = ProfilePrediction("global", rec.config.spec, T_hat=0.05)
        rep = verify_against_run(rec, [pred], Window(annulus=False, x_max=0.5))[0]
        assert rep.ratio_min < 1 - 1e-3

    def test_annulus_window(self):
        rec = _synthetic_record(2.0)
        win = Window(K=2.0)
        rep = verify_against_run(rec, [ProfilePrediction("global", rec.config.spec, T_hat=0.05)], win, keep_rows=True)[0]
        x, t = rep.rows[:, 0], rep.rows[:, 1]
        tau = 0.05 - t
        assert np.all(x * x >= 2 * tau) and np.all(x * x <= tau * np.abs(np.log(tau)) * 4)

    def test_trend_on_exact_record_is_flat(self):
        rec = _synthetic_record(2.0)
        tr = global_trend(rec, ProfilePrediction("global", rec.config.spec, T_hat=0.05))
        assert max(tr["deviations"]) < 1e-9

    def test_empty_window(self):
        rec = _synthetic_record(2.0)
        with pytest.raises(ValueError, match="empty comparison window"):
            verify_against_run(rec, [ProfilePrediction("global", rec.config.spec, T_hat=0.05)], Window(tau_min=1.0))

    def test_upper_bound_on_reference_run(self, reference):
        rec = reference.reference_run(1)
        fit = reference.fitted_A(1)
        pred = ProfilePrediction("upper_h", rec.config.spec, A=fit["A"])
        win = Window(t_min=0.5 * rec.estimate.T_hat, annulus=False, x_max=0.5, u_min=locate_M(rec.config.spec))
        rep = verify_against_run(rec, [pred], win)[0]
        assert rep.verdict and rep.violation_fraction < 0.01
