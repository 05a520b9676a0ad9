"""Gauss-Kronrod integration and finite-difference stencils against exact values."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowup_lab.finite_diff import fornberg_weights, radial_derivative
from blowup_lab.quadrature import QuadratureError, gauss_legendre, gk15, integrate, integrate_panels


class TestGaussKronrod:
    @pytest.mark.parametrize("deg", range(0, 23))
    def test_kronrod_exact_for_polynomials(self, deg):
        K, _, _ = gk15(lambda x: x**deg, np.array([0.0]), np.array([1.0]))
        np.testing.assert_allclose(K[0], 1.0 / (deg + 1), rtol=1e-14)

    def test_error_estimate_vanishes_for_low_degree(self):
        _, E, _ = gk15(lambda x: 3 * x**5 - x**2, np.array([-1.0]), np.array([2.0]))
        assert E[0] < 1e-13

    def test_integrate_smooth(self):
        val, err = integrate(np.exp, 0.0, 3.0, rtol=1e-14)
        np.testing.assert_allclose(val, math.expm1(3.0), rtol=1e-14)
        assert err <= 1e-13 * val

    def test_integrate_endpoint_singularity(self):
        val, _ = integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, rtol=1e-10)
        np.testing.assert_allclose(val, 2.0, rtol=1e-9)

    @given(a=st.floats(-5, 5), w=st.floats(0.01, 5), k=st.floats(0.1, 20))
    def test_integrate_cosine(self, a, w, k):
        b = a + w
        val, _ = integrate(lambda x: np.cos(k * x), a, b, rtol=1e-12, atol=1e-15)
        exact = (math.sin(k * b) - math.sin(k * a)) / k
        assert abs(val - exact) <= 1e-11 * max(abs(exact), 1.0 / k)

    def test_panels(self):
        edges = np.array([0.0, 1.0, 2.5, 4.0])
        vals, errs = integrate_panels(lambda x: x * x, edges, rtol=1e-13)
        np.testing.assert_allclose(vals, np.diff(edges**3) / 3.0, rtol=1e-14)
        assert np.all(errs >= 0)

    def test_positive_guard(self):
        with pytest.raises(QuadratureError):
            integrate(lambda x: x - 0.5, 0.0, 1.0, rtol=1e-10, positive=True)

    def test_gauss_legendre_matches_numpy(self):
        x, w = gauss_legendre(16)
        xr, wr = np.polynomial.legendre.leggauss(16)
        np.testing.assert_array_equal(x, xr)
        np.testing.assert_array_equal(w, wr)


class TestFiniteDifferences:
    @given(z=st.floats(-1.0, 1.0), shift=st.floats(0.05, 0.5))
    def test_fornberg_exact_on_quartics(self, z, shift):
        x = np.array([-2.0, -1.1, 0.0, 0.7, 2.0]) * shift
        c = fornberg_weights(z, x, 1)
        poly = np.polynomial.Polynomial([0.3, -1.0, 2.0, 0.5, -0.25])
        np.testing.assert_allclose(c[:, 1] @ poly(x), poly.deriv()(z), rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(c[:, 0] @ poly(x), poly(z), rtol=1e-9, atol=1e-9)

    def test_radial_derivative_even_polynomial(self):
        r = np.concatenate([[0.0], np.geomspace(1e-3, 2.0, 60)])
        u = 1.0 - r**2 + 0.5 * r**4
        np.testing.assert_allclose(radial_derivative(r, u), -2 * r + 2 * r**3, atol=1e-10)

    def test_radial_derivative_fourth_order(self):
        errs = []
        for n in (41, 81):
            r = np.linspace(0.0, 2.0, n)
            errs.append(np.max(np.abs(radial_derivative(r, np.exp(-r * r)) + 2 * r * np.exp(-r * r))))
        assert errs[0] / errs[1] > 12.0  # fourth order would give 16

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            radial_derivative(np.arange(4.0), np.ones(4))
