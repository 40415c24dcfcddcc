import numpy as np
import pytest

from src.core.grid_domain import IntervalGrid, first_eigenvalue
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise
from src.core.presets import ConstantProfile, LinearProfile, decaying_sine_noise
from src.core.energy_functionals import (
    concavity_constants, concavity_gap, criterion_additive, criterion_multiplicative,
    diagnostics_from_ensemble, minimal_K, tstar_bound
)
from src.core.spde_integrator import ModelParams


def _sine(grid, amplitude):
    return grid.sample(lambda x: amplitude * np.sin(np.pi * x / grid.length))


def _discrete_lhs(c, lam_h):
    # -(1/2)|grad u0|^2 + (1/4)|u0|_4^4 for c*sin(pi x) with m = 3
    return -0.5 * c ** 2 * lam_h / 2.0 + 0.25 * 3.0 * c ** 4 / 8.0


class TestConcavityConstants:
    """Test the (epsilon, delta) choice and the resulting gap."""

    def test_cubic(self):
        constants = concavity_constants(3.0)
        assert constants.epsilon == pytest.approx(0.5)
        assert constants.delta == pytest.approx(1.0 / 6.0)
        assert constants.gap == pytest.approx(1.0)

    @pytest.mark.parametrize("m", [1.0, 1.5, 2.0, 5.0, 11.0])
    def test_gap_is_half_of_m_minus_one(self, m):
        assert concavity_gap(m) == pytest.approx((m - 1.0) / 2.0, abs=1e-12)

    @pytest.mark.parametrize("m", [0.5, np.inf, np.nan])
    def test_invalid_m(self, m):
        with pytest.raises(ValueError):
            concavity_constants(m)

    def test_with_K_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            concavity_constants(3.0).with_K(0.0)


class TestMinimalK:
    """Test the minimal K and the blow-up time bound."""

    def test_additive_formula(self):
        expected = 3.0 * (7.0 / 6.0) * (2.0 + 0.5) ** 2 / (8.0 * 4.0)
        assert minimal_K("additive", 2.0, 4.0, 3.0, flat_energy_limit=0.5) == pytest.approx(expected)

    def test_multiplicative_ignores_flat_energy(self):
        assert minimal_K("multiplicative", 2.0, 4.0, 3.0, flat_energy_limit=10.0) == pytest.approx(
            minimal_K("additive", 2.0, 4.0, 3.0)
        )

    def test_undefined_for_nonpositive_criterion(self):
        with pytest.raises(ValueError):
            minimal_K("additive", 1.0, 0.0, 3.0)

    def test_undefined_for_linear_growth(self):
        with pytest.raises(ValueError):
            minimal_K("additive", 1.0, 1.0, 1.0)

    def test_tstar(self):
        assert tstar_bound(3.0, 2.0, 0.5) == pytest.approx(3.0)
        assert tstar_bound(3.0, 0.0, 0.5) == float("inf")
        with pytest.raises(ValueError):
            tstar_bound(0.0, 1.0, 0.5)


class TestCriterionAdditive:
    """Test the additive-noise criterion."""

    def test_deterministic_large_sine(self, unit_grid, focusing_params):
        report = criterion_additive(_sine(unit_grid, 6.0), focusing_params, None, unit_grid, None)
        lam_h = first_eigenvalue(unit_grid)
        assert report.lhs == pytest.approx(_discrete_lhs(6.0, lam_h), rel=1e-12)
        assert report.lhs == pytest.approx(32.67, abs=0.02)
        assert report.verdict == "blow-up-predicted"
        assert report.v0 == pytest.approx(18.0)
        assert report.K_min == pytest.approx(3.5 * 18.0 ** 2 / (8.0 * report.lhs))
        assert report.K == report.K_min
        assert report.tstar_bound == pytest.approx(report.K / (18.0 / 6.0))
        assert report.lambda_1 == pytest.approx(np.pi ** 2)

    def test_small_sine_not_predicted(self, unit_grid, focusing_params):
        report = criterion_additive(_sine(unit_grid, 1.0), focusing_params, None, unit_grid, None)
        assert report.lhs < 0
        assert report.verdict == "not-predicted"
        assert report.K_min is None
        assert report.tstar_bound is None

    def test_critical_amplitude_near_five(self, focusing_params):
        grid = IntervalGrid(1.0, 199)
        below = criterion_additive(_sine(grid, 5.1), focusing_params, None, grid, None)
        above = criterion_additive(_sine(grid, 5.2), focusing_params, None, grid, None)
        assert below.lhs < 0 < above.lhs

    def test_noise_lowers_lhs(self, unit_grid, focusing_params):
        s, g, horizon = 2.0, 1.5, 20.0
        noise = decaying_sine_noise(sigma_scale=s, decay_rate=g, decay_horizon=horizon)
        quiet = criterion_additive(_sine(unit_grid, 6.0), focusing_params, None, unit_grid, None)
        noisy = criterion_additive(_sine(unit_grid, 6.0), focusing_params, noise, unit_grid, None)
        lam_h = first_eigenvalue(unit_grid)
        time_factor = (1.0 - np.exp(-2.0 * g * horizon)) / (2.0 * g)
        assert noisy.grad_energy == pytest.approx(s ** 2 * lam_h / 2.0 * time_factor, rel=1e-6)
        assert noisy.flat_energy_limit == pytest.approx(s ** 2 / 2.0 * time_factor, rel=1e-6)
        assert noisy.lhs == pytest.approx(quiet.lhs - 0.5 * noisy.grad_energy, rel=1e-9)
        expected_K = 3.5 * (18.0 + noisy.flat_energy_limit) ** 2 / (8.0 * noisy.lhs)
        assert noisy.K_min == pytest.approx(expected_K, rel=1e-9)

    def test_K_override_used_for_bound(self, unit_grid, focusing_params):
        report = criterion_additive(_sine(unit_grid, 6.0), focusing_params, None, unit_grid, None, K=10.0)
        assert report.K == 10.0
        assert report.K_min < 10.0
        assert report.tstar_bound == pytest.approx(10.0 / 3.0)

    def test_divergent_noise_not_evaluable(self, unit_grid, focusing_params):
        noise = AdditiveNoise(
            sigma_fn=lambda x, t: np.sin(np.pi * x) / np.sqrt(t),
            eta_fn=lambda x, t, z: 0.0 * x,
            decay_horizon=1.0,
        )
        report = criterion_additive(_sine(unit_grid, 6.0), focusing_params, noise, unit_grid, None)
        assert report.verdict == "not-evaluable"
        assert report.lhs is None
        assert report.message

    def test_hypotheses_flag(self, unit_grid):
        report = criterion_additive(_sine(unit_grid, 6.0), ModelParams(1.0, 1.0, 1.0), None, unit_grid, None)
        assert not report.hypotheses_ok
        assert report.K_min is None


class TestCriterionMultiplicative:
    """Test the multiplicative-noise criterion and its kappa window."""

    def test_kappa_term_added(self, unit_grid, focusing_params):
        noise = MultiplicativeNoise.for_measure(np.pi, ConstantProfile(0.0), None)
        report = criterion_multiplicative(_sine(unit_grid, 6.0), focusing_params, noise, unit_grid, None)
        assert report.kappa == pytest.approx(np.pi ** 2 / 2.0)
        assert report.components.kappa_term == pytest.approx(np.pi ** 2 / 2.0 / 4.0 * 18.0)
        assert report.lhs == pytest.approx(54.88, abs=0.05)
        assert report.kappa_window_ok
        assert report.verdict == "blow-up-predicted"

    def test_outside_window_not_predicted(self, unit_grid, focusing_params):
        noise = MultiplicativeNoise.for_measure(5.0, ConstantProfile(0.0), None)
        report = criterion_multiplicative(_sine(unit_grid, 6.0), focusing_params, noise, unit_grid, None)
        assert report.lhs > 0
        assert not report.kappa_window_ok
        assert report.kappa_margin < 0
        assert report.verdict == "not-predicted"

    def test_jump_part_counts(self, unit_grid, focusing_params, single_atom):
        noise = MultiplicativeNoise.for_measure(0.0, LinearProfile(1.0), single_atom)
        report = criterion_multiplicative(_sine(unit_grid, 6.0), focusing_params, noise, unit_grid, single_atom)
        assert report.kappa == pytest.approx(1.0)

    def test_discrete_eigenvalue_option(self, unit_grid, focusing_params):
        noise = MultiplicativeNoise.for_measure(0.0, ConstantProfile(0.0), None)
        report = criterion_multiplicative(
            _sine(unit_grid, 6.0), focusing_params, noise, unit_grid, None, use_continuum_eigenvalue=False
        )
        assert report.lambda_1 == pytest.approx(first_eigenvalue(unit_grid))


class TestDiagnostics:
    """Test the I(t) diagnostics along a mean-square series."""

    def test_integral_and_second_derivative(self, focusing_params):
        times = np.linspace(0.0, 1.0, 101)
        v = np.exp(times)
        series = diagnostics_from_ensemble(times, v, focusing_params, K=2.0)
        assert series.I[0] == pytest.approx(2.0)
        assert series.I[-1] == pytest.approx(2.0 + np.e - 1.0, rel=1e-4)
        assert np.allclose(series.Isecond, v, rtol=1e-3)
        assert np.allclose(series.Iprime, v)
        assert np.allclose(series.ratio, v / series.I ** (7.0 / 6.0))

    def test_fast_growth_keeps_ratio_monotone(self, focusing_params):
        times = np.linspace(0.0, 0.3, 31)
        series = diagnostics_from_ensemble(times, np.exp(10.0 * times), focusing_params, K=1.0)
        assert series.ratio_monotone
        assert series.ratio_violation_time is None

    def test_decay_violates_ratio_immediately(self, focusing_params):
        times = np.linspace(0.0, 1.0, 11)
        series = diagnostics_from_ensemble(times, np.exp(-times), focusing_params, K=1.0)
        assert series.ratio_violation_time == pytest.approx(times[1])

    def test_lower_bound_from_energy(self, focusing_params):
        times = np.linspace(0.0, 1.0, 11)
        J = np.full_like(times, 0.25)
        series = diagnostics_from_ensemble(times, np.exp(times), focusing_params, K=1.0, J=J)
        assert np.allclose(series.lower_bound, 2.0)
        assert series.bound_violation_time == pytest.approx(0.0)

    @pytest.mark.parametrize("times", [np.array([0.0, 0.1]), np.array([0.0, 0.1, 0.3])])
    def test_rejects_short_or_uneven_times(self, focusing_params, times):
        with pytest.raises(ValueError):
            diagnostics_from_ensemble(times, np.ones_like(times), focusing_params, K=1.0)

    def test_rejects_nonpositive_K(self, focusing_params):
        times = np.linspace(0.0, 1.0, 5)
        with pytest.raises(ValueError):
            diagnostics_from_ensemble(times, np.ones_like(times), focusing_params, K=0.0)
