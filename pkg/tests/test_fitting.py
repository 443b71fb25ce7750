import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioncavity.fitting import (
    fit_exponential_loss,
    fit_lorentzian,
    fit_poly_minimum,
    levenberg_marquardt,
    lorentzian,
    saturating_exponential,
)

TWO_PI = 2 * math.pi


class TestLorentzian:
    def test_noiseless_round_trip(self):
        x = np.linspace(-120.0, 120.0, 41)   # MHz scale
        y = lorentzian(x, 1.0, 0.0, 40.2, 0.0)
        fit = fit_lorentzian(x, y)
        assert fit.converged
        assert fit.params["amplitude"] == pytest.approx(1.0, rel=1e-8)
        assert fit.params["center"] == pytest.approx(0.0, abs=1e-8 * 40.2)
        assert fit.params["width"] == pytest.approx(40.2, rel=1e-8)
        assert fit.params["offset"] == pytest.approx(0.0, abs=1e-8)

    def test_inverted_peak(self):
        x = np.linspace(-50, 50, 61)
        y = lorentzian(x, -0.7, 5.0, 18.0, 1.0)   # a dip on a plateau, like
        fit = fit_lorentzian(x, y)                 # the fluorescence drop
        assert fit.converged
        assert fit.params["amplitude"] == pytest.approx(-0.7, rel=1e-7)
        assert fit.params["width"] == pytest.approx(18.0, rel=1e-7)

    def test_flat_data_flagged(self):
        x = np.linspace(0, 10, 20)
        fit = fit_lorentzian(x, np.full(20, 2.5))
        assert not fit.converged
        assert "degenerate" in fit.message

    def test_needs_five_points(self):
        with pytest.raises(ValueError):
            fit_lorentzian(np.arange(4.0), np.arange(4.0))

    def test_noisy_recovery(self):
        rng = np.random.default_rng(8)
        x = np.linspace(-100, 100, 81)
        y = lorentzian(x, 2.0, 12.0, 30.0, 0.3) + rng.normal(0, 0.02, x.size)
        fit = fit_lorentzian(x, y)
        assert fit.converged
        assert fit.params["width"] == pytest.approx(30.0, rel=0.05)
        assert fit.stderr["width"] > 0

    def test_weights_change_solution(self):
        rng = np.random.default_rng(9)
        x = np.linspace(-60, 60, 61)
        y = lorentzian(x, 1.0, 0.0, 20.0, 0.0) + rng.normal(0, 0.05, x.size)
        w = np.where(np.abs(x) < 30, 10.0, 0.1)
        plain = fit_lorentzian(x, y)
        weighted = fit_lorentzian(x, y, weights=w)
        assert plain.params["width"] != weighted.params["width"]

    def test_ssr_never_increases(self):
        x = np.linspace(-50, 50, 41)
        y = lorentzian(x, 1.3, -4.0, 22.0, 0.1)
        fit = fit_lorentzian(x, y)
        trace = fit.ssr_trace
        assert all(b <= a for a, b in zip(trace, trace[1:]))


class TestPolyMinimum:
    def test_exact_parabola(self):
        x = np.linspace(0.0, 6.0, 13)
        y = (x - 3.0) ** 2
        x_min, value, fit = fit_poly_minimum(x, y, degree=2)
        assert x_min == pytest.approx(3.0, abs=1e-10)
        assert value == pytest.approx(0.0, abs=1e-10)
        assert fit.converged

    def test_quartic_with_offset(self):
        x = np.linspace(-2, 2, 41)
        y = 0.5 + (x - 0.3) ** 2 + 0.2 * (x - 0.3) ** 4
        x_min, value, _ = fit_poly_minimum(x, y, degree=4)
        assert x_min == pytest.approx(0.3, abs=1e-9)
        assert value == pytest.approx(0.5, abs=1e-9)

    def test_monotone_data_rejected(self):
        x = np.linspace(0, 5, 12)
        with pytest.raises(ValueError, match="minimum"):
            fit_poly_minimum(x, np.exp(-x), degree=3)

    def test_degree_validation(self):
        x = np.linspace(0, 5, 12)
        y = (x - 2) ** 2
        with pytest.raises(ValueError):
            fit_poly_minimum(x, y, degree=1)
        with pytest.raises(ValueError):
            fit_poly_minimum(x, y, degree=7)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 50.0), st.floats(-10.0, 10.0))
    def test_affine_invariance(self, scale, shift):
        x = np.linspace(-1.5, 1.5, 31)
        y = (x - 0.4) ** 2 + 0.05 * x ** 3
        ref, _, _ = fit_poly_minimum(x, y, degree=4)
        scaled, _, _ = fit_poly_minimum(x, scale * y + shift, degree=4)
        assert scaled == pytest.approx(ref, abs=1e-9)


class TestExponentialLoss:
    def test_noiseless_round_trip(self):
        t = np.linspace(0.0, 90.0, 10)
        loss = saturating_exponential(t, 1756.0, 23600.0, 123.0)
        fit = fit_exponential_loss(t, loss)
        assert fit.converged
        assert fit.params["tau"] == pytest.approx(123.0, rel=0.01)
        assert fit.params["loss0"] == pytest.approx(1756.0, rel=1e-6)

    def test_tight_noiseless_recovery(self):
        t = np.linspace(0.0, 300.0, 20)
        loss = saturating_exponential(t, 500.0, 2000.0, 123.0)
        fit = fit_exponential_loss(t, loss)
        assert fit.params["tau"] == pytest.approx(123.0, rel=1e-6)

    def test_noisy_monte_carlo(self):
        # 5% multiplicative noise, 20 points. Over 1.5 tau the time constant
        # is identified to the ~15% scale of the quoted uncertainty; a 90-day
        # span (0.73 tau) degrades the median error to ~19%, so the sampling
        # must reach into the saturating part of the curve.
        rng = np.random.default_rng(31)
        t = np.linspace(0.0, 180.0, 20)
        truth = saturating_exponential(t, 1756.0, 23600.0, 123.0)
        errors = []
        for _ in range(100):
            noisy = truth * (1.0 + rng.normal(0.0, 0.05, t.size))
            fit = fit_exponential_loss(t, noisy)
            if fit.converged:
                errors.append(abs(fit.params["tau"] - 123.0) / 123.0)
        assert len(errors) >= 90
        assert np.median(errors) <= 0.15

    def test_constant_data_flagged(self):
        t = np.linspace(0.0, 40.0, 6)
        fit = fit_exponential_loss(t, np.full(6, 800.0))
        assert "unidentifiable" in fit.message
        assert math.isinf(fit.stderr["tau"])

    def test_negative_times_rejected(self):
        with pytest.raises(ValueError):
            fit_exponential_loss(np.array([-1.0, 0, 1, 2]), np.zeros(4))

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            fit_exponential_loss(np.array([0.0, 1, 2]), np.zeros(3))


class TestRoundTripProperty:
    def test_all_models_recover_random_parameters(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            amp, center, width, offset = (
                rng.uniform(0.5, 3), rng.uniform(-20, 20),
                rng.uniform(5, 40), rng.uniform(-1, 1))
            x = np.linspace(-100, 100, 101)
            fit = fit_lorentzian(x, lorentzian(x, amp, center, width, offset))
            assert fit.params["width"] == pytest.approx(width, rel=1e-6)
            assert fit.params["amplitude"] == pytest.approx(amp, rel=1e-6)

            loss0, rise, tau = (rng.uniform(100, 2000), rng.uniform(500, 3e4),
                                rng.uniform(40, 400))
            t = np.linspace(0.0, 2.5 * tau, 25)
            fit = fit_exponential_loss(t, saturating_exponential(t, loss0, rise, tau))
            assert fit.params["tau"] == pytest.approx(tau, rel=1e-6)

    def test_lm_gradient_criterion(self):
        # converged fits satisfy the documented gradient bound
        def residuals(p):
            return np.array([p[0] - 3.0, 2.0 * (p[1] + 1.0)])

        result = levenberg_marquardt(residuals, (0.0, 0.0), names=("a", "b"))
        assert result.converged
        assert result.params["a"] == pytest.approx(3.0, abs=1e-9)
        assert result.params["b"] == pytest.approx(-1.0, abs=1e-9)
