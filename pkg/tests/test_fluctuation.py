"""Tests for replica_lab/fluctuation.py: ℒ, ε̃-derivatives and concentration."""
import numpy as np
import pytest

from replica_lab.disorder import MonteCarloDisorder, QuadratureDisorder, QuenchedSample
from replica_lab.fluctuation import (
    concavity_check,
    first_derivative_check,
    fluctuation_identity_check,
    free_energy_variance_profile,
    observable_L,
    overlap_concentration_profile,
    reduced_coupling_snr,
    reduced_model,
)
from replica_lab.interpolation import PathPoint, TrialParameters, path_point
from replica_lab.prior import point_mass, rademacher
from replica_lab.rs_potential import Matrix


def _sample(signal, perturb) -> QuenchedSample:
    n = len(signal)
    return QuenchedSample(
        signal=np.asarray(signal, dtype=float),
        coupling_noise=np.zeros((1, n * (n + 1) // 2)),
        mf_noise=np.zeros((1, n)),
        perturb_noise=np.asarray(perturb, dtype=float),
        phi=None,
        seed=0,
        index=0,
    )


POINT = PathPoint(k=1, t=0.0, epsilon=0.5, effective_epsilon=0.5)

# ε̃ = 0.3 + 0.5·0.5/2 = 0.425
TRIAL = TrialParameters.constant(0.5, 2)
INNER = path_point(1, 0.5, 0.3, TRIAL, 1.0)


class TestObservable:
    """Tests for observable_L."""

    def test_zero_configuration(self):
        assert observable_L([0.0, 0.0], _sample([1.0, -1.0], [0.3, 0.1]), POINT) == 0.0

    @pytest.mark.parametrize("s", [1.0, 2.0])
    def test_single_component_without_noise(self, s):
        """n = 1, x = s, ẑ = 0: ℒ = −s²/2."""
        assert observable_L([s], _sample([s], [0.0]), POINT) == pytest.approx(-s ** 2 / 2)

    def test_noise_term(self):
        value = observable_L([1.0], _sample([0.0], [1.0]), PathPoint(1, 0.0, 0.25, 0.25))
        assert value == pytest.approx(0.5 - 1.0)

    def test_requires_positive_epsilon(self):
        with pytest.raises(ValueError):
            observable_L([1.0], _sample([1.0], [0.0]), PathPoint(1, 0.0, 0.0, 0.0))


class TestReducedModel:
    """Tests for the reduced (pairwise + side channel) model."""

    def test_coupling_snr(self):
        point = path_point(2, 0.25, 0.0, TrialParameters.constant(0.5, 4), 0.5)
        assert reduced_coupling_snr(point, 4, 0.5) == pytest.approx((4 - 2 + 1 - 0.25) / 2.0)

    def test_side_snr(self):
        model = reduced_model(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(40))
        assert model.side_snr == pytest.approx(0.425)
        assert model.batch.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_zero_effective_epsilon(self):
        point = path_point(1, 0.0, 0.0, TRIAL, 1.0)
        with pytest.raises(ValueError):
            reduced_model(point, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(40))


class TestFirstDerivative:
    """Tests for first_derivative_check."""

    def test_point_mass(self):
        report = first_derivative_check(INNER, TRIAL, point_mass(), 1.0, 1, QuadratureDisorder(40))
        assert report.fd_value == 0.0
        assert report.formula_value == 0.0
        assert report.passed

    def test_single_component_quadrature(self):
        report = first_derivative_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(80))
        assert abs(report.fd_value - report.formula_value) < 1e-5
        assert abs(report.l_residual) < 1e-6
        assert report.formula_value <= 0.0
        assert report.passed

    def test_two_components_quadrature(self):
        report = first_derivative_check(INNER, TRIAL, rademacher(), 2.0, 2, QuadratureDisorder(80))
        assert abs(report.residual) < 1e-4
        assert report.passed

    def test_monte_carlo(self):
        report = first_derivative_check(INNER, TRIAL, rademacher(), 1.0, 3, MonteCarloDisorder(2000, seed=2), sigmas=4.0)
        assert report.passed
        assert report.formula_value <= 0.0


class TestConcavity:
    """Tests for concavity_check."""

    def test_point_mass(self):
        report = concavity_check(INNER, TRIAL, point_mass(), 1.0, 1, QuadratureDisorder(40))
        assert report.second_differences == [0.0]
        assert report.passed

    def test_single_component_quadrature(self):
        report = concavity_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(80))
        assert report.concave
        assert all(value <= 0.0 for value in report.formula_values)
        assert all(abs(r) < 1e-4 for r in report.residuals)
        assert report.passed

    def test_grid(self):
        report = concavity_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(40), spacing=0.05, half_width=2)
        assert report.grid == pytest.approx([0.325, 0.375, 0.425, 0.475, 0.525])
        assert len(report.second_differences) == 3

    def test_grid_below_zero(self):
        with pytest.raises(ValueError):
            concavity_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(40), spacing=0.5)


class TestFluctuationIdentity:
    """Tests for fluctuation_identity_check."""

    def test_point_mass(self):
        report = fluctuation_identity_check(INNER, TRIAL, point_mass(), 1.0, 1, QuadratureDisorder(40))
        assert report.lhs == 0.0
        assert report.rhs_terms["side_channel"] == 0.0
        assert report.residual == pytest.approx(0.0, abs=1e-15)

    def test_single_component_quadrature(self):
        report = fluctuation_identity_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(80))
        assert abs(report.residual) < 1e-6
        assert abs(report.thermal_residual) < 1e-6
        assert abs(report.disorder_residual) < 1e-6
        assert report.passed

    def test_terms_add_up(self):
        report = fluctuation_identity_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(40))
        assert report.lhs - report.rhs == pytest.approx(report.residual, abs=1e-14)
        assert report.rhs_terms["side_channel"] == pytest.approx(1.0 / (4 * 0.425))

    def test_split_adds_up(self):
        report = fluctuation_identity_check(INNER, TRIAL, rademacher(), 1.0, 1, QuadratureDisorder(40))
        assert report.thermal_lhs + report.disorder_lhs == pytest.approx(report.lhs, abs=1e-12)

    @pytest.mark.slow
    def test_monte_carlo(self):
        report = fluctuation_identity_check(INNER, TRIAL, rademacher(), 1.0, 4, MonteCarloDisorder(5000, seed=4))
        assert abs(report.residual) <= 4 * report.stderr


class TestProfiles:
    """Tests for the concentration diagnostics."""

    def test_point_mass_overlap_profile(self):
        profile = overlap_concentration_profile(point_mass(), 1.0, [2, 3], K=2, epsilon=0.1, samples=20)
        assert profile.values == [0.0, 0.0]
        assert profile.passed

    def test_point_mass_variance_profile(self):
        profile = free_energy_variance_profile(Matrix(1.0), point_mass(), [2, 3], samples=20)
        assert profile.values == [0.0, 0.0]
        assert profile.passed

    @pytest.mark.slow
    def test_overlap_fluctuations_decrease(self):
        profile = overlap_concentration_profile(rademacher(), 2.0, [2, 4, 6, 8], K=2, epsilon=0.5, samples=1000)
        assert profile.decreasing

    @pytest.mark.slow
    def test_free_energy_variance_decreases(self):
        profile = free_energy_variance_profile(Matrix(1.0), rademacher(), [2, 4, 8], samples=2000, seed=3)
        assert profile.passed
        assert profile.slope <= -0.5

    @pytest.mark.slow
    def test_free_energy_variance_reproducible_across_seeds(self):
        a = free_energy_variance_profile(Matrix(1.0), rademacher(), [4], samples=2000, seed=3)
        b = free_energy_variance_profile(Matrix(1.0), rademacher(), [4], samples=2000, seed=4)
        assert abs(a.values[0] - b.values[0]) <= 5 * np.hypot(a.stderrs[0], b.stderrs[0])
