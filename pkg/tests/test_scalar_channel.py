"""Tests for replica_lab/scalar_channel.py: the scalar Gaussian denoising channel."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replica_lab.prior import bernoulli, make_discrete, moment, point_mass, rademacher
from replica_lab.scalar_channel import (
    ScalarChannel,
    f_den,
    f_den_snr,
    fden_snr_derivative,
    i_den,
    i_den_snr,
    iden_snr_derivative,
    mmse,
    posterior_mean,
)


def _mc_mean(values: np.ndarray) -> tuple[float, float]:
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


class TestFreeEnergy:
    """Tests for f_den and i_den."""

    @pytest.mark.parametrize("prior", [rademacher(), bernoulli(0.3), point_mass(2.0)])
    def test_infinite_noise_is_zero(self, prior):
        """Σ = ∞ gives exactly zero for both quantities."""
        channel = ScalarChannel(prior, math.inf)
        assert f_den(channel) == 0.0
        assert i_den(channel) == 0.0

    def test_point_mass_at_zero(self):
        assert f_den(ScalarChannel(point_mass(), 1.0)) == 0.0
        assert i_den(ScalarChannel(point_mass(), 0.5)) == 0.0

    def test_rademacher_shift(self):
        """i_den − f_den = E[S²]/(2Σ²) = 0.5 at Σ² = 1."""
        channel = ScalarChannel(rademacher(), 1.0)
        assert i_den(channel) - f_den(channel) == pytest.approx(0.5, abs=1e-8)

    @pytest.mark.parametrize("sigma", np.linspace(0.3, 3.0, 10))
    def test_shift_three_atoms(self, sigma):
        prior = make_discrete([-1.0, 0.5, 2.0], [0.2, 0.5, 0.3])
        channel = ScalarChannel(prior, float(sigma))
        expected = moment(prior, 2) / (2 * sigma ** 2)
        assert i_den(channel) - f_den(channel) == pytest.approx(expected, abs=1e-8)

    def test_rademacher_against_monte_carlo(self):
        """At Σ² = 1, f_den = 1/2 − E ln cosh(1 + Z)."""
        rng = np.random.default_rng(2024)
        y = 1.0 + rng.standard_normal(1_000_000)
        mean, stderr = _mc_mean(np.logaddexp(y, -y) - math.log(2.0))
        value = f_den(ScalarChannel(rademacher(), 1.0))
        assert abs(value - (0.5 - mean)) <= 4 * stderr

    def test_snr_parametrization(self):
        prior = bernoulli(0.3)
        assert f_den_snr(prior, 4.0) == f_den(ScalarChannel(prior, 0.5))
        assert i_den_snr(prior, 0.0) == 0.0

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            f_den(ScalarChannel(rademacher(), 1.0), quad_order=1)


class TestChannel:
    """Tests for ScalarChannel construction."""

    @pytest.mark.parametrize("sigma", [0.0, -1.0, float("nan")])
    def test_invalid_sigma(self, sigma):
        with pytest.raises(ValueError):
            ScalarChannel(rademacher(), sigma)

    def test_from_zero_snr(self):
        assert math.isinf(ScalarChannel.from_snr(rademacher(), 0.0).sigma)

    def test_from_snr(self):
        assert ScalarChannel.from_snr(rademacher(), 4.0).sigma == pytest.approx(0.5)


class TestPosteriorMean:
    """Tests for posterior_mean."""

    def test_point_mass(self):
        assert posterior_mean(ScalarChannel(point_mass(1.5), 0.7), -3.0) == 1.5

    def test_rademacher_symmetric(self):
        assert posterior_mean(ScalarChannel(rademacher(), 1.0), 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_rademacher_tanh(self):
        """For Rademacher at Σ² = 1 the posterior mean is tanh(y)."""
        assert posterior_mean(ScalarChannel(rademacher(), 1.0), 1.0) == pytest.approx(math.tanh(1.0), abs=1e-12)

    def test_infinite_sigma_rejected(self):
        with pytest.raises(ValueError):
            posterior_mean(ScalarChannel(rademacher(), math.inf), 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-50.0, 50.0), st.floats(0.05, 5.0))
    def test_within_support(self, y, sigma):
        prior = make_discrete([-2.0, 0.0, 1.0], [0.3, 0.3, 0.4])
        value = posterior_mean(ScalarChannel(prior, sigma), y)
        assert -2.0 <= value <= 2.0


class TestDerivatives:
    """Tests for the SNR derivatives and the MMSE."""

    def test_zero_snr_rademacher(self):
        """Centered prior: the overlap E⟨X⟩² vanishes at zero SNR."""
        assert abs(fden_snr_derivative(rademacher(), 0.0)) < 1e-6

    def test_rademacher_overlap_against_monte_carlo(self):
        """−2 ∂f_den/∂Σ⁻² = E tanh(1 + Z) at Σ² = 1."""
        rng = np.random.default_rng(7)
        mean, stderr = _mc_mean(np.tanh(1.0 + rng.standard_normal(1_000_000)))
        assert abs(-2.0 * fden_snr_derivative(rademacher(), 1.0) - mean) <= 4 * stderr

    @pytest.mark.parametrize("snr", [0.2, 1.0, 3.0])
    def test_i_mmse(self, snr):
        """Twice the slope of i_den is the MMSE."""
        prior = bernoulli(0.3)
        channel = ScalarChannel.from_snr(prior, snr)
        assert 2.0 * iden_snr_derivative(prior, snr) == pytest.approx(mmse(channel), abs=1e-6)

    def test_mmse_at_zero_snr_is_variance(self):
        prior = bernoulli(0.3)
        assert mmse(ScalarChannel(prior, math.inf)) == pytest.approx(0.3 - 0.09)

    @pytest.mark.parametrize("snr", [0.0, 0.5, 2.0])
    def test_overlap_within_bounds(self, snr):
        overlap = -2.0 * fden_snr_derivative(rademacher(), snr)
        assert -1e-6 <= overlap <= 1.0 + 1e-6

    def test_negative_snr_rejected(self):
        with pytest.raises(ValueError):
            fden_snr_derivative(rademacher(), -0.1)
