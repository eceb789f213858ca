"""Tests for replica_lab/interpolation.py: the (k, t) path and its checks."""
import dataclasses
import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replica_lab.disorder import draw_sample
from replica_lab.gibbs_oracle import coupling_term, hamiltonian
from replica_lab.interpolation import (
    PathConfig,
    PathPoint,
    TrialParameters,
    adapt_parameters,
    dfdt_check,
    endpoint_checks,
    gaussian_stability_check,
    interp_hamiltonian,
    path_batch,
    path_free_energy,
    path_point,
    path_snrs,
    perturbation_bound_check,
    pointwise_telescoping,
    psi_integral_identity,
    rle_gamma_lambda,
    sum_rule_residual,
    t_dependence_gap,
    t_gap_scaling,
    telescoping_check,
)
from replica_lab.prior import bernoulli, point_mass, rademacher
from replica_lab.rs_potential import Matrix, minimize_potential, psi


class TestPathCoordinates:
    """Tests for path points and per-block SNRs."""

    def test_effective_epsilon(self):
        m = TrialParameters((0.2, 0.4, 0.6))
        point = path_point(2, 0.5, 0.1, m, delta=1.0)
        assert point.effective_epsilon == pytest.approx(0.1 + (0.2 + 0.5 * 0.4) / 3.0)

    def test_effective_epsilon_monotone(self):
        """ε̃ never decreases along the path."""
        m = TrialParameters((0.3, 0.0, 0.9, 0.5))
        values = [path_point(k, t, 0.05, m, 0.8).effective_epsilon for k in range(1, 5) for t in (0.0, 0.25, 0.75)]
        assert values == sorted(values)

    @pytest.mark.parametrize("k, t, eps", [(0, 0.5, 0.0), (4, 0.5, 0.0), (1, 1.5, 0.0), (1, 0.5, -0.1)])
    def test_invalid_point(self, k, t, eps):
        with pytest.raises(ValueError):
            path_point(k, t, eps, TrialParameters.constant(0.5, 3), 1.0)

    def test_invalid_trial(self):
        with pytest.raises(ValueError):
            TrialParameters(())
        with pytest.raises(ValueError):
            TrialParameters((0.1, -0.2))
        with pytest.raises(ValueError):
            TrialParameters((1.5,)).check_against(rademacher())

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            PathConfig(0, 4)
        with pytest.raises(ValueError):
            PathConfig(3, 4, t_grid=(0.5, 0.0))

    def test_switched_off_blocks_are_exact_zeros(self):
        m = TrialParameters((0.3, 0.6, 0.9))
        start = path_snrs(path_point(2, 0.0, 0.0, m, 1.0), m, 1.0)
        end = path_snrs(path_point(2, 1.0, 0.0, m, 1.0), m, 1.0)
        assert start.mean_field[1] == 0.0
        assert end.coupling[1] == 0.0
        np.testing.assert_array_equal(start.coupling[2:], end.coupling[2:])


class TestInterpolatingHamiltonian:
    """Tests for interp_hamiltonian."""

    def test_start_is_sum_of_weak_channels(self):
        """At (1, 0; 0) the Hamiltonian is the sum of K pairwise channels of noise KΔ."""
        K, delta, n = 4, 0.8, 3
        prior = rademacher()
        m = TrialParameters.constant(0.5, K)
        sample = draw_sample(Matrix(delta), prior, n, seed=3, index=0, blocks=K)
        x = np.array([1.0, -1.0, 1.0])
        expected = 0.0
        for b in range(K):
            block = dataclasses.replace(sample, coupling_noise=sample.coupling_noise[b:b + 1])
            expected += hamiltonian(Matrix(K * delta), x, block)
        value = interp_hamiltonian(path_point(1, 0.0, 0.0, m, delta), m, x, sample, delta)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_end_without_trial_is_zero(self):
        K, delta = 3, 1.0
        m = TrialParameters.constant(0.0, K)
        sample = draw_sample(Matrix(delta), rademacher(), 3, seed=3, index=0, blocks=K)
        assert interp_hamiltonian(path_point(K, 1.0, 0.0, m, delta), m, [1.0, 1.0, -1.0], sample, delta) == 0.0

    def test_block_mismatch(self):
        m = TrialParameters.constant(0.5, 3)
        sample = draw_sample(Matrix(1.0), rademacher(), 3, seed=3, index=0, blocks=2)
        with pytest.raises(ValueError):
            interp_hamiltonian(path_point(1, 0.0, 0.0, m, 1.0), m, [1.0, 1.0, 1.0], sample, 1.0)

    def test_weight_of_single_block(self):
        sample = draw_sample(Matrix(1.0), rademacher(), 2, seed=1, index=0, blocks=2)
        x = [1.0, -1.0]
        assert coupling_term(Matrix(1.0), x, sample, 0.0, block=1) == 0.0


class TestTelescoping:
    """Tests for the junction between consecutive steps."""

    def test_pointwise(self):
        report = pointwise_telescoping(rademacher(), 1.0, n=3, K=4, trials=100)
        assert report.passed
        assert report.max_abs_difference < 1e-12

    def test_batch_is_bitwise(self):
        m = TrialParameters((0.1, 0.7, 0.4))
        report = telescoping_check(m, bernoulli(0.4), 1.0, n=3, epsilon=0.2, samples=30)
        assert report.passed
        assert report.max_abs_difference == 0.0
        assert len(report.differences) == 2

    def test_needs_two_steps(self):
        with pytest.raises(ValueError):
            pointwise_telescoping(rademacher(), 1.0, n=3, K=1, trials=5)


class TestPointMass:
    """A point mass at zero makes every path quantity vanish."""

    def test_path_free_energy(self):
        m = TrialParameters.constant(0.0, 3)
        f, stderr = path_free_energy(path_point(2, 0.5, 0.3, m, 1.0), m, point_mass(), 1.0, 3, 20)
        assert f == 0.0
        assert stderr == 0.0

    def test_dfdt(self):
        m = TrialParameters.constant(0.0, 3)
        report = dfdt_check(path_point(2, 0.5, 0.0, m, 1.0), m, point_mass(), 1.0, 3, 20)
        assert report.fd_value == 0.0
        assert report.formula_value == 0.0
        assert report.passed

    def test_sum_rule(self):
        config = PathConfig(3, 2, 0.1)
        report = sum_rule_residual(config, TrialParameters.constant(0.0, 2), point_mass(), 1.0, 20)
        assert report.lhs == 0.0
        assert report.rhs == 0.0
        assert report.residual == 0.0
        assert report.passed

    def test_adapted_sequence(self):
        m, stderrs = adapt_parameters(PathConfig(3, 3, 0.1), point_mass(), 1.0, 20)
        assert m.values == (0.0, 0.0, 0.0)
        assert stderrs == [0.0, 0.0, 0.0]

    def test_gap(self):
        gap, _ = t_dependence_gap(1, TrialParameters.constant(0.0, 3), PathConfig(3, 3, 0.1), point_mass(), 1.0, 20)
        assert gap == 0.0


class TestEndpoints:
    """Tests for the path endpoints and Gaussian stability."""

    def test_endpoints(self):
        m = TrialParameters.constant(0.5, 2)
        report = endpoint_checks(rademacher(), 1.0, 2, m, 0.0, samples=2000, seed=5, sigmas=4.0)
        assert report.start_passed
        assert report.end_passed

    def test_stability_single_block(self):
        assert gaussian_stability_check(1, 10_000).passed

    def test_stability_many_blocks(self):
        report = gaussian_stability_check(100, 100_000, seed=3)
        assert 0.985 <= report.variance <= 1.015
        assert report.passed

    def test_stability_weighted(self):
        m = np.array([0.2, 0.5, 0.9, 0.1])
        weights = np.sqrt(m / (m.size * m.mean()))
        assert gaussian_stability_check(4, 50_000, weights=weights).passed

    def test_stability_wrong_weights(self):
        with pytest.raises(ValueError):
            gaussian_stability_check(3, 100, weights=[1.0, 0.0])


class TestDerivativeInT:
    """Tests for dfdt_check."""

    def test_zero_trial_sign(self):
        """With m_k = 0 both the formula and the finite difference are positive."""
        m = TrialParameters.constant(0.0, 4)
        report = dfdt_check(path_point(2, 0.5, 0.0, m, 1.0), m, rademacher(), 1.0, 3, 2000)
        assert report.formula_value >= 0.0
        assert report.fd_value > 0.0

    def test_t_too_close_to_edge(self):
        m = TrialParameters.constant(0.5, 4)
        with pytest.raises(ValueError):
            dfdt_check(path_point(1, 0.0, 0.0, m, 1.0), m, rademacher(), 1.0, 3, 20)

    @pytest.mark.slow
    def test_matches_formula(self):
        delta = 1.0
        m_star, _ = minimize_potential(Matrix(0.8), rademacher())
        m = TrialParameters.constant(m_star, 8)
        report = dfdt_check(path_point(3, 0.5, 0.0, m, delta), m, rademacher(), delta, 4, 2000, seed=11)
        assert report.passed
        assert report.finite_size_correction > 0.0


class TestSumRule:
    """Tests for the sum rule on common disorder."""

    @pytest.mark.slow
    def test_adapted(self):
        config = PathConfig(4, 8, 0.1)
        prior, delta = rademacher(), 1.0
        batch = path_batch(prior, delta, 4, 8, 2000, seed=13)
        m, _ = adapt_parameters(config, prior, delta, 2000, batch=batch)
        report = sum_rule_residual(config, m, prior, delta, 2000, batch=batch)
        assert report.passed
        assert report.remainder_nonnegative

    @pytest.mark.slow
    def test_argmin_upper_bound(self):
        config = PathConfig(4, 4, 0.1)
        prior, delta = rademacher(), 0.8
        m_star, _ = minimize_potential(Matrix(delta), prior)
        report = sum_rule_residual(config, TrialParameters.constant(m_star, 4), prior, delta, 2000, seed=13)
        assert report.remainder_nonnegative
        assert report.upper_bound_holds
        assert report.variance_term == pytest.approx(0.0, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            sum_rule_residual(PathConfig(2, 3), TrialParameters.constant(0.1, 2), rademacher(), 1.0, 10)


class TestAdaptation:
    """Tests for adapted trial sequences and weak t-dependence."""

    def test_within_bounds(self):
        prior = bernoulli(0.4)
        m, _ = adapt_parameters(PathConfig(3, 1, 0.3), prior, 1.0, 200)
        assert 0.0 <= m.values[0] <= 0.4

    @pytest.mark.slow
    def test_monotone_in_epsilon(self):
        prior, delta = rademacher(), 1.0
        low, low_se = adapt_parameters(PathConfig(3, 4, 0.1), prior, delta, 2000, seed=17)
        high, high_se = adapt_parameters(PathConfig(3, 4, 0.5), prior, delta, 2000, seed=17)
        for a, b, sa, sb in zip(low.values, high.values, low_se, high_se):
            assert b >= a - 3 * math.hypot(sa, sb)

    def test_gap_at_t_zero(self):
        m = TrialParameters.constant(0.5, 3)
        gap, stderr = t_dependence_gap(1, m, PathConfig(3, 3, 0.1), rademacher(), 1.0, 50, t=0.0)
        assert gap == 0.0
        assert stderr == 0.0

    def test_gap_defaults_to_mid_step(self):
        for function in (t_dependence_gap, t_gap_scaling):
            assert inspect.signature(function).parameters["t"].default == 0.5

    def test_gap_needs_enough_steps(self):
        with pytest.raises(ValueError):
            t_dependence_gap(1, TrialParameters.constant(0.5, 2), PathConfig(3, 2), rademacher(), 1.0, 20)

    @pytest.mark.slow
    def test_gap_shrinks_with_K(self):
        prior, delta = rademacher(), 0.8
        m_star, _ = minimize_potential(Matrix(delta), prior)
        scaling = t_gap_scaling(3, [8, 16, 32, 64], m_star, prior, delta, 0.5, 2000, seed=19, t=1.0)
        assert scaling.passed
        assert scaling.slope <= -0.5


class TestPerturbationBound:
    """Tests for perturbation_bound_check."""

    def test_bound_holds(self):
        report = perturbation_bound_check(PathConfig(3, 2, 0.2), rademacher(), 1.0, 300)
        assert report.bound == pytest.approx(0.1)
        assert report.passed

    def test_zero_epsilon(self):
        report = perturbation_bound_check(PathConfig(3, 2, 0.0), rademacher(), 1.0, 50)
        assert report.difference == 0.0


class TestRlePath:
    """Tests for the RLE path constraint and the ψ integral."""

    def test_gamma_lambda_example(self):
        gamma, lam = rle_gamma_lambda(0.5, 1.0, 1.0, 1.0)
        assert gamma == pytest.approx(0.5)
        assert lam == pytest.approx(1.0 / 6.0, abs=1e-12)

    def test_gamma_lambda_endpoints(self):
        assert rle_gamma_lambda(0.0, 0.7, 2.0, 0.5)[1] == 0.0
        gamma, lam = rle_gamma_lambda(1.0, 0.7, 2.0, 0.5)
        assert gamma == 0.0
        assert lam == 2.0 / (0.5 + 0.7)

    def test_gamma_lambda_invalid(self):
        with pytest.raises(ValueError):
            rle_gamma_lambda(1.2, 0.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            rle_gamma_lambda(0.5, -0.5, 1.0, 1.0)

    @pytest.mark.parametrize(
        "E, alpha, delta, expected",
        [(0.0, 1.0, 1.0, 0.0), (1.0, 1.0, 1.0, (math.log(2) - 0.5) / 2)],
    )
    def test_psi_examples(self, E, alpha, delta, expected):
        result = psi_integral_identity(E, alpha, delta)
        assert result.closed_form == pytest.approx(expected, abs=1e-15)
        assert abs(result.residual) < 1e-10

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 2.0), st.floats(0.1, 5.0), st.floats(0.25, 4.0))
    def test_psi_identity(self, E, alpha, delta):
        result = psi_integral_identity(E, alpha, delta, t_quad_order=32)
        assert abs(result.residual) < 1e-10
        assert result.closed_form == psi(alpha, delta, E)


class TestPathPointType:
    def test_frozen(self):
        point = PathPoint(k=1, t=0.0, epsilon=0.0, effective_epsilon=0.0)
        with pytest.raises(dataclasses.FrozenInstanceError):
            point.k = 2
