"""Tests for thermo.xy."""

import math

import numpy as np
import pytest
from scipy.special import i0e, i1e

from thermo.errors import ConfigError, DepthUnsupported, LaplaceHypothesisError
from thermo.observables import Observable, angle_correlation, angle_cosine
from thermo.xy import (
    Regime,
    bessel_i0,
    bessel_i0_quadrature,
    bessel_i0_series,
    bessel_ratio,
    eta_expectation,
    laplace_tail,
    log_bessel_i0,
    xy_critical_point,
    xy_limit_check,
    xy_phi,
)


class TestBessel:
    """Tests for the I0 implementations."""

    @pytest.mark.parametrize("x", [0.0, 0.5, 2.0, 5.0, 20.0])
    def test_three_routes_agree(self, x):
        """Library, power series and trapezoid agree to 1e-13."""
        value = bessel_i0(x)

        assert value == pytest.approx(bessel_i0_series(x), rel=1e-13)
        assert value == pytest.approx(bessel_i0_quadrature(x), rel=1e-13)

    def test_known_value(self):
        """I0(2) = 2.2795853023360673."""
        assert bessel_i0(2.0) == pytest.approx(2.2795853023360673, rel=1e-14)

    def test_log_survives_large_arguments(self):
        """log I0(1000) ~ 1000 - log(2 pi 1000)/2 with no overflow."""
        assert log_bessel_i0(1000.0) == pytest.approx(1000 - 0.5 * math.log(2 * math.pi * 1000), abs=1e-3)

    def test_ratio(self):
        """I1/I0 is 0 at the origin and tends to 1."""
        assert bessel_ratio(0.0) == 0.0
        assert 0.99 < bessel_ratio(100.0) < 1.0

    def test_vectorized(self):
        """Arrays go through elementwise."""
        values = bessel_i0(np.array([0.0, 1.0]))

        np.testing.assert_allclose(values, [1.0, 1.2660658777520082], rtol=1e-14)

    @pytest.mark.parametrize("x", [-1.0, 701.0, math.inf])
    def test_rejects_out_of_range(self, x):
        """Arguments outside [0, 700] are refused."""
        with pytest.raises(ConfigError):
            bessel_i0(x)


class TestXyPhi:
    """Tests for xy_phi."""

    def test_origin(self):
        """phi(0) = 0 with phi''(0) = beta (beta/2 - 1)."""
        assert xy_phi(3.0, 0.0) == (0.0, 0.0, 1.5)

    @pytest.mark.parametrize(("beta", "x"), [(1.0, 0.3), (4.0, 0.9), (2.5, 0.1)])
    def test_derivatives_match_differences(self, beta, x):
        """Closed-form derivatives agree with central differences."""
        h = 1e-5
        _, first, second = xy_phi(beta, x)
        up, down = xy_phi(beta, x + h), xy_phi(beta, x - h)

        assert first == pytest.approx((up[0] - down[0]) / (2 * h), abs=1e-8)
        assert second == pytest.approx((up[1] - down[1]) / (2 * h), abs=1e-6)

    def test_rejects_negative_radius(self):
        """x must be non-negative."""
        with pytest.raises(ConfigError):
            xy_phi(1.0, -0.1)


class TestXyCriticalPoint:
    """Tests for xy_critical_point."""

    @pytest.mark.parametrize("beta", [1.0, 1.9])
    def test_subcritical(self, beta):
        """Below beta = 2 the maximizer is the origin."""
        data = xy_critical_point(beta)

        assert data.regime is Regime.SUBCRITICAL
        assert data.r_star == 0.0
        assert data.second_derivative < 0

    @pytest.mark.parametrize("beta", [2.5, 4.0])
    def test_supercritical(self, beta):
        """Above beta = 2, r* lies in (sqrt((beta-2)/beta), 1] and solves I1/I0(beta r) = r."""
        data = xy_critical_point(beta)

        assert data.regime is Regime.SUPERCRITICAL
        assert math.sqrt((beta - 2) / beta) < data.r_star <= 1.0
        assert data.residual < 1e-12
        assert abs(i1e(beta * data.r_star) / i0e(beta * data.r_star) - data.r_star) < 1e-12
        assert data.second_derivative < 0

    def test_critical(self):
        """At beta = 2 the origin is a flat quartic maximum."""
        data = xy_critical_point(2.0)

        assert data.regime is Regime.CRITICAL
        assert data.r_star == 0.0
        assert data.second_derivative == 0.0
        assert data.flatness_order == 2

    def test_radius_grows_with_beta(self):
        """r* increases with beta above the transition."""
        radii = [xy_critical_point(beta).r_star for beta in (2.2, 2.5, 3.0, 4.0, 6.0, 10.0)]

        assert all(a < b for a, b in zip(radii, radii[1:]))

    def test_maximum_beats_origin(self):
        """phi(r*) > phi(0) = 0 in the ordered phase."""
        assert xy_critical_point(4.0).phi_max > 0

    def test_rejects_non_positive_beta(self):
        """beta must be positive."""
        with pytest.raises(ConfigError):
            xy_critical_point(0.0)

    def test_to_dict(self):
        """The regime serializes as its string value."""
        assert xy_critical_point(1.0).to_dict()["regime"] == "subcritical"


class TestEtaExpectation:
    """Tests for eta_expectation."""

    def test_uniform_at_zero(self):
        """eta_0 is the uniform product: cos(theta_0 - theta_1) averages to 0."""
        assert eta_expectation(0.0, angle_correlation()) == pytest.approx(0.0, abs=1e-14)

    def test_pair_correlation(self):
        """int cos(theta_0 - theta_1) d eta_x = (I1(x)/I0(x))^2."""
        x = 2.0

        assert eta_expectation(x, angle_correlation()) == pytest.approx(bessel_ratio(x) ** 2, rel=1e-10)

    def test_rotation_average_kills_single_site_mean(self):
        """Averaging over directions removes the mean of cos(theta_0)."""
        assert eta_expectation(3.0, angle_cosine()) == pytest.approx(0.0, abs=1e-14)

    def test_quadrature_budget(self):
        """Too many nodes for the observable depth are refused."""
        with pytest.raises(ConfigError):
            eta_expectation(1.0, angle_correlation(), nodes=4096)

    def test_rejects_negative_argument(self):
        """x must be non-negative."""
        with pytest.raises(ConfigError):
            eta_expectation(-1.0, angle_cosine())


class TestLaplaceTail:
    """Tests for laplace_tail."""

    def test_quadratic_exponent_with_shrinking_window(self):
        """alpha = 2, gamma = 1, b_n = n^(-1/4): within 1% of 1/(2n) at n = 1e4."""
        n = 1e4

        tail = laplace_tail(2.0, 1.0, n, n ** (-0.25))

        assert tail.asymptotic == pytest.approx(1 / (2 * n), rel=1e-14)
        assert abs(tail.ratio - 1) < 0.01
        # The exact value is (1 - e^{-100}) / (2n)
        assert tail.ratio == pytest.approx(1.0, abs=1e-10)

    def test_quartic_exponent(self):
        """alpha = 4, gamma = 1: within 2% at n = 1e5."""
        tail = laplace_tail(4.0, 1.0, 1e5)

        assert abs(tail.ratio - 1) < 0.02
        assert tail.asymptotic == pytest.approx(math.gamma(0.5) / (4 * math.sqrt(1e5)), rel=1e-14)

    def test_hypothesis_violated(self):
        """n b_n^alpha below 10 is refused."""
        with pytest.raises(LaplaceHypothesisError):
            laplace_tail(2.0, 1.0, 10.0, 0.5)

    def test_rejects_bad_exponent(self):
        """alpha must be positive."""
        with pytest.raises(ConfigError):
            laplace_tail(0.0, 1.0, 100.0)


class TestXyLimitCheck:
    """Tests for xy_limit_check."""

    def test_ordered_phase_converges(self):
        """beta = 4, f = cos(theta_0 - theta_1): gap to r*^2 shrinks below 0.03."""
        table = xy_limit_check(4.0, angle_correlation(), [50, 100, 200], samples=100_000, seed=0, tolerance=0.03)

        r_star = xy_critical_point(4.0).r_star
        assert table.prediction == pytest.approx(r_star**2, rel=1e-9)
        assert table.passed
        assert table.rows[-1].gap < 0.03

    def test_disordered_phase(self):
        """beta = 1 predicts 0; the gap at n = 200 is a finite-size effect of order 1/n."""
        table = xy_limit_check(1.0, angle_correlation(), [50, 100, 200], samples=100_000, seed=1)

        assert table.prediction == pytest.approx(0.0, abs=1e-14)
        assert table.rows[-1].gap < 0.01

    def test_rejects_deep_observables(self):
        """Observables beyond two sites are refused."""
        deep = Observable(name="triple", depth=3, fn=lambda s: np.cos(s[..., 0] - s[..., 2]))

        with pytest.raises(DepthUnsupported):
            xy_limit_check(4.0, deep, [50], samples=100, seed=0)
