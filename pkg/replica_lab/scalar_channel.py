"""Scalar Gaussian denoising channel Y = S + Σ·Z with a discrete prior on S.

The expectation over S is an exact atom sum; the one over Z uses a
probabilists' Gauss–Hermite rule. Everything is computed in the SNR
parametrization ``snr = Σ⁻²`` so that Σ = ∞ is the exact value ``snr = 0``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp, softmax

from config import settings
from replica_lab.prior import Prior, moment
from utils.quadrature import gauss_hermite_normal

logger = logging.getLogger("replica_lab.scalar_channel")


class QuadratureOverflowError(ArithmeticError):
    """Raised when a log-sum-exp over the prior atoms is not finite."""
    pass


@dataclass(frozen=True)
class ScalarChannel:
    """Prior plus noise standard deviation Σ (``math.inf`` allowed)."""

    prior: Prior
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive or inf, got {self.sigma}")

    @property
    def snr(self) -> float:
        return 0.0 if math.isinf(self.sigma) else 1.0 / self.sigma ** 2

    @classmethod
    def from_snr(cls, prior: Prior, snr: float) -> "ScalarChannel":
        if snr < 0:
            raise ValueError(f"snr must be nonnegative, got {snr}")
        return cls(prior, math.inf if snr == 0 else 1.0 / math.sqrt(snr))


# ---------------------------------------------------------------------------
# Free energy and mutual information
# ---------------------------------------------------------------------------

def _log_partition_table(prior: Prior, snr: float, quad_order: int, centered: bool) -> np.ndarray:
    """ln of the posterior normalization for every (S atom, Z node) pair."""
    a = prior.atom_array
    rule = gauss_hermite_normal(quad_order)
    s = a[:, None, None]                    # true signal
    z = rule.nodes[None, :, None]
    x = a[None, None, :]                    # candidate
    if centered:
        u = x - s
        quad = u ** 2 / 2.0
    else:
        u = x
        quad = x ** 2 / 2.0 - x * s
    exponent = prior.log_weights[None, None, :] - snr * quad + math.sqrt(snr) * u * z
    table = logsumexp(exponent, axis=2)
    if not np.all(np.isfinite(table)):
        raise QuadratureOverflowError(f"non-finite log-partition at snr={snr}, order={quad_order}")
    return table


@lru_cache(maxsize=4096)
def _scalar_free_energy(prior: Prior, snr: float, quad_order: int, centered: bool) -> float:
    if snr == 0.0:
        return 0.0
    table = _log_partition_table(prior, snr, quad_order, centered)
    rule = gauss_hermite_normal(quad_order)
    per_atom = table @ rule.weights
    return float(-np.dot(prior.weight_array, per_atom))


def f_den(channel: ScalarChannel, quad_order: int = settings.QUAD_ORDER) -> float:
    """Free energy −E ln Σ_b p_b exp(−Σ⁻²(a_b²/2 − a_b S − a_b Z Σ)).

    Returns exactly 0 for Σ = ∞.
    """
    if quad_order < 2:
        raise ValueError(f"quad_order must be >= 2, got {quad_order}")
    return _scalar_free_energy(channel.prior, channel.snr, quad_order, False)


def i_den(channel: ScalarChannel, quad_order: int = settings.QUAD_ORDER) -> float:
    """Mutual information per component of the scalar channel.

    Equals ``f_den + E[S²]/(2Σ²)`` up to quadrature error.
    """
    if quad_order < 2:
        raise ValueError(f"quad_order must be >= 2, got {quad_order}")
    return _scalar_free_energy(channel.prior, channel.snr, quad_order, True)


def f_den_snr(prior: Prior, snr: float, quad_order: int = settings.QUAD_ORDER) -> float:
    """``f_den`` as a function of Σ⁻²."""
    return _scalar_free_energy(prior, float(snr), quad_order, False)


def i_den_snr(prior: Prior, snr: float, quad_order: int = settings.QUAD_ORDER) -> float:
    return _scalar_free_energy(prior, float(snr), quad_order, True)


# ---------------------------------------------------------------------------
# Posterior quantities
# ---------------------------------------------------------------------------

def posterior_mean(channel: ScalarChannel, y: float) -> float:
    """E[X | Y = y]; always inside ``[-M, M]``."""
    if math.isinf(channel.sigma):
        raise ValueError("posterior_mean needs a finite sigma")
    if not math.isfinite(y):
        raise ValueError(f"y must be finite, got {y}")
    a = channel.prior.atom_array
    snr = channel.snr
    probs = softmax(channel.prior.log_weights - snr * (a ** 2 / 2.0 - a * y))
    value = float(np.dot(probs, a))
    m = channel.prior.support_bound
    return min(max(value, -m), m)


def mmse(channel: ScalarChannel, quad_order: int = settings.QUAD_ORDER) -> float:
    """E[(S − E[X|Y])²] by atom sum and Gauss–Hermite quadrature."""
    prior = channel.prior
    if channel.snr == 0.0:
        return moment(prior, 2) - moment(prior, 1) ** 2
    a = prior.atom_array
    rule = gauss_hermite_normal(quad_order)
    snr = channel.snr
    s = a[:, None, None]
    z = rule.nodes[None, :, None]
    x = a[None, None, :]
    exponent = prior.log_weights[None, None, :] - snr * (x ** 2 / 2.0 - x * s) + math.sqrt(snr) * x * z
    probs = softmax(exponent, axis=2)
    post_mean = probs @ a                   # (atoms, nodes)
    sq_err = (a[:, None] - post_mean) ** 2
    return float(np.dot(prior.weight_array, sq_err @ rule.weights))


def _central_or_one_sided(fn, x: float, step: float) -> float:
    if x - step < 0:
        # second-order forward difference
        return (-3.0 * fn(x) + 4.0 * fn(x + step) - fn(x + 2.0 * step)) / (2.0 * step)
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def fden_snr_derivative(
    prior: Prior,
    snr: float,
    quad_order: int = settings.QUAD_ORDER,
    step: float | None = None,
) -> float:
    """∂f_den/∂(Σ⁻²) at ``snr`` by finite differences.

    ``−2`` times this value is the squared posterior-mean overlap E⟨X⟩², which
    lies in ``[0, E[S²]]``.
    """
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    step = 1e-5 * max(1.0, snr) if step is None else step
    return _central_or_one_sided(lambda u: f_den_snr(prior, u, quad_order), snr, step)


def iden_snr_derivative(
    prior: Prior,
    snr: float,
    quad_order: int = settings.QUAD_ORDER,
    step: float | None = None,
) -> float:
    """∂i_den/∂(Σ⁻²); twice this value is the scalar MMSE."""
    if snr < 0:
        raise ValueError(f"snr must be nonnegative, got {snr}")
    step = 1e-5 * max(1.0, snr) if step is None else step
    return _central_or_one_sided(lambda u: i_den_snr(prior, u, quad_order), snr, step)
