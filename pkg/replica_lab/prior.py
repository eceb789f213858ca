"""Discrete signal priors P0 = sum_b p_b delta(a_b)."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

logger = logging.getLogger("replica_lab.prior")

WEIGHT_TOLERANCE = 1e-9
MIN_CACHED_ORDER = 8


class PriorError(ValueError):
    """Raised for empty, non-finite, negative, duplicated or unnormalized prior data."""
    pass


@dataclass(frozen=True)
class Prior:
    """A discrete law on finitely many distinct atoms.

    Instances are hashable and immutable; build them with :func:`make_discrete`.
    """

    atoms: tuple[float, ...]
    weights: tuple[float, ...]
    support_bound: float
    moments: tuple[float, ...] = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def atom_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weight_array)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. components."""
        idx = rng.choice(self.size, size=size, p=self.weight_array)
        return self.atom_array[idx]

    def configurations(self, n: int) -> np.ndarray:
        """All points of support^n, shape ``(size**n, n)``, lexicographic order."""
        return np.array(list(itertools.product(self.atoms, repeat=n)), dtype=float).reshape(-1, n)

    def configuration_log_prior(self, n: int) -> np.ndarray:
        """``sum_i ln P0(x_i)`` for every configuration of :meth:`configurations`."""
        logs = self.log_weights
        return np.array([sum(c) for c in itertools.product(logs, repeat=n)], dtype=float)


def make_discrete(atoms: Sequence[float], weights: Sequence[float], max_order: int = MIN_CACHED_ORDER) -> Prior:
    """Validate atoms/weights and build a :class:`Prior`.

    Args:
        atoms: Distinct real atom locations.
        weights: Nonnegative probabilities; renormalized when the sum is within 1e-9 of 1.
        max_order: Highest moment to cache (at least 8).

    Returns:
        Prior with moments cached up to ``max(8, max_order)``.

    Raises:
        PriorError: On empty or mismatched lists, non-finite values, negative
            weights, duplicate atoms or a weight sum off by more than 1e-9.
    """
    atoms = [float(a) for a in atoms]
    weights = [float(w) for w in weights]
    if not atoms or not weights:
        raise PriorError("prior needs at least one atom")
    if len(atoms) != len(weights):
        raise PriorError(f"{len(atoms)} atoms but {len(weights)} weights")
    if not all(math.isfinite(v) for v in atoms + weights):
        raise PriorError(f"non-finite atom or weight in atoms={atoms}, weights={weights}")
    if any(w < 0 for w in weights):
        raise PriorError(f"negative weight in {weights}")
    if len(set(atoms)) != len(atoms):
        raise PriorError(f"duplicate atoms in {atoms}")
    total = sum(weights)
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise PriorError(f"weights sum to {total!r}, not 1")
    weights = [w / total for w in weights]

    order = max(MIN_CACHED_ORDER, max_order)
    a = np.asarray(atoms)
    p = np.asarray(weights)
    moments = tuple(float(np.dot(p, a ** k)) for k in range(order + 1))
    return Prior(
        atoms=tuple(atoms),
        weights=tuple(weights),
        support_bound=float(max(abs(x) for x in atoms)),
        moments=moments,
    )


def moment(prior: Prior, order: int) -> float:
    """``sum_b p_b a_b^order``; orders beyond the cache are computed on demand."""
    if order < 0:
        raise ValueError(f"moment order must be nonnegative, got {order}")
    if order < len(prior.moments):
        return prior.moments[order]
    return float(np.dot(prior.weight_array, prior.atom_array ** order))


def is_sign_symmetric(prior: Prior, atol: float = 1e-12) -> bool:
    """True when P0(a) = P0(−a) for every atom and some atom is nonzero."""
    order = np.argsort(prior.atom_array)
    a = prior.atom_array[order]
    w = prior.weight_array[order]
    return bool(
        np.any(a != 0.0)
        and np.allclose(a, -a[::-1], atol=atol, rtol=0.0)
        and np.allclose(w, w[::-1], atol=atol, rtol=0.0)
    )


# ---------------------------------------------------------------------------
# Named priors
# ---------------------------------------------------------------------------

def rademacher() -> Prior:
    return make_discrete([1.0, -1.0], [0.5, 0.5])


def bernoulli(rho: float) -> Prior:
    """Sparse binary prior on {0, 1} with P(1) = rho."""
    if not 0.0 < rho <= 1.0:
        raise PriorError(f"bernoulli rho must be in (0, 1], got {rho}")
    if rho == 1.0:
        return make_discrete([1.0], [1.0])
    return make_discrete([0.0, 1.0], [1.0 - rho, rho])


def point_mass(value: float = 0.0) -> Prior:
    return make_discrete([value], [1.0])


NAMED_PRIORS = {
    "rademacher": rademacher,
    "point-mass": point_mass,
    "bernoulli": lambda: bernoulli(0.5),
}


def prior_from_config(value: Any) -> Prior:
    """Build a prior from a name (``"rademacher"``) or ``{atoms, weights}`` table.

    Names of the form ``bernoulli:0.3`` select the sparsity.
    """
    if isinstance(value, Prior):
        return value
    if isinstance(value, str):
        name = value.strip().lower()
        if name.startswith("bernoulli:"):
            try:
                return bernoulli(float(name.split(":", 1)[1]))
            except ValueError as e:
                raise PriorError(f"bad bernoulli sparsity in {value!r}") from e
        if name not in NAMED_PRIORS:
            raise PriorError(f"unknown prior {value!r}; known: {', '.join(sorted(NAMED_PRIORS))}")
        return NAMED_PRIORS[name]()
    if isinstance(value, dict):
        try:
            return make_discrete(value["atoms"], value["weights"])
        except KeyError as e:
            raise PriorError(f"prior table is missing {e}") from e
    raise PriorError(f"cannot build a prior from {value!r}")
