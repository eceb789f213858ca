"""Tests for replica_lab/prior.py: discrete priors and their moments."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replica_lab.prior import (
    PriorError,
    bernoulli,
    is_sign_symmetric,
    make_discrete,
    moment,
    point_mass,
    prior_from_config,
    rademacher,
)


class TestMakeDiscrete:
    """Tests for validation in make_discrete."""

    def test_rademacher_moments(self):
        """Rademacher: zero odd moments, unit even moments."""
        prior = rademacher()
        assert moment(prior, 0) == 1.0
        assert moment(prior, 1) == 0.0
        assert moment(prior, 2) == 1.0
        assert moment(prior, 3) == 0.0
        assert moment(prior, 4) == 1.0

    def test_sparse_binary_moments(self):
        """Atoms {0, 1} with weights {0.7, 0.3} have first and second moment 0.3."""
        prior = make_discrete([0, 1], [0.7, 0.3])
        assert moment(prior, 1) == pytest.approx(0.3)
        assert moment(prior, 2) == pytest.approx(0.3)

    def test_point_mass_second_moment(self):
        """A single atom at 2 has E[S^2] = 4."""
        assert moment(make_discrete([2.0], [1.0]), 2) == 4.0

    def test_moment_beyond_cache(self):
        """Orders past the cached ones are computed on demand."""
        prior = make_discrete([2.0], [1.0])
        assert moment(prior, 12) == pytest.approx(2.0 ** 12)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            moment(rademacher(), -1)

    def test_support_bound(self):
        """support_bound is the largest atom magnitude."""
        assert make_discrete([-3.0, 1.0], [0.5, 0.5]).support_bound == 3.0

    def test_renormalizes_within_tolerance(self):
        """Weights off by less than 1e-9 are renormalized to sum to one."""
        prior = make_discrete([0.0, 1.0], [0.5, 0.5 + 5e-10])
        assert sum(prior.weights) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "atoms, weights",
        [
            ([], []),
            ([1.0], [0.5, 0.5]),
            ([1.0, -1.0], [1.2, -0.2]),
            ([1.0, 1.0], [0.5, 0.5]),
            ([1.0, -1.0], [0.5, 0.4]),
            ([0.0, 1.0], [float("nan"), 1.0]),
            ([float("inf"), 1.0], [0.5, 0.5]),
            ([float("nan"), 1.0], [0.5, 0.5]),
        ],
    )
    def test_invalid_prior(self, atoms, weights):
        """Empty, mismatched, negative, duplicated, non-finite or unnormalized data are rejected."""
        with pytest.raises(PriorError):
            make_discrete(atoms, weights)

    def test_hashable(self):
        """Equal priors hash equally, so they can key caches."""
        assert hash(rademacher()) == hash(rademacher())
        assert rademacher() == rademacher()


class TestSignSymmetry:
    """Tests for is_sign_symmetric."""

    @pytest.mark.parametrize(
        "prior, expected",
        [
            (rademacher(), True),
            (make_discrete([-2.0, 0.0, 2.0], [0.25, 0.5, 0.25]), True),
            (make_discrete([-1.0, 1.0], [0.3, 0.7]), False),
            (make_discrete([-1.0, 2.0], [0.5, 0.5]), False),
            (bernoulli(0.3), False),
            (point_mass(), False),
        ],
    )
    def test_classification(self, prior, expected):
        assert is_sign_symmetric(prior) is expected


class TestConfigurations:
    """Tests for configuration enumeration."""

    def test_lexicographic_order(self):
        configs = rademacher().configurations(2)
        np.testing.assert_array_equal(configs, [[1, 1], [1, -1], [-1, 1], [-1, -1]])

    def test_log_prior_normalized(self):
        """exp of the configuration log-prior sums to one."""
        prior = make_discrete([0.0, 1.0, 2.0], [0.2, 0.3, 0.5])
        assert np.exp(prior.configuration_log_prior(3)).sum() == pytest.approx(1.0)

    def test_sample_stays_on_support(self):
        rng = np.random.default_rng(0)
        draws = bernoulli(0.3).sample(rng, 1000)
        assert set(np.unique(draws)) <= {0.0, 1.0}


class TestPriorFromConfig:
    """Tests for prior_from_config."""

    def test_named(self):
        assert prior_from_config("rademacher") == rademacher()
        assert prior_from_config("Point-Mass") == point_mass()

    def test_bernoulli_sparsity(self):
        assert moment(prior_from_config("bernoulli:0.3"), 1) == pytest.approx(0.3)

    def test_table(self):
        prior = prior_from_config({"atoms": [0.0, 2.0], "weights": [0.5, 0.5]})
        assert moment(prior, 2) == pytest.approx(2.0)

    @pytest.mark.parametrize("value", ["gaussian", "bernoulli:abc", "bernoulli:1.5", {"atoms": [1.0]}, 3])
    def test_invalid(self, value):
        with pytest.raises(PriorError):
            prior_from_config(value)


@st.composite
def discrete_priors(draw):
    atoms = draw(st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=1, max_size=5, unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=len(atoms), max_size=len(atoms)))
    total = sum(raw)
    return make_discrete(atoms, [w / total for w in raw])


class TestMomentProperties:
    """Property tests over random discrete priors."""

    @settings(max_examples=50, deadline=None)
    @given(discrete_priors())
    def test_variance_nonnegative(self, prior):
        assert moment(prior, 2) >= moment(prior, 1) ** 2 - 1e-12

    @settings(max_examples=50, deadline=None)
    @given(discrete_priors(), st.integers(1, 8))
    def test_moment_bounded_by_support(self, prior, order):
        assert abs(moment(prior, order)) <= prior.support_bound ** order + 1e-12
