"""Exact finite-n posteriors by enumeration of support^n.

Single-sample functions (:func:`hamiltonian`, :func:`enumerate_gibbs`, ...)
work on one :class:`QuenchedSample`; the disorder-averaged oracles
(:func:`free_energy`, :func:`nishimori_residual`) run on a vectorized
:class:`DisorderBatch` and accept either averaging method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from config import settings
from replica_lab.disorder import (
    DisorderBatch,
    DisorderMethod,
    MonteCarloDisorder,
    QuenchedSample,
    build_batch,
    check_enumerable,
    interaction_coefficient,
    interaction_index,
    rows_from_samples,
)
from replica_lab.prior import Prior, is_sign_symmetric, moment
from replica_lab.rs_potential import Matrix, ModelSpec, Rle, mutual_information, tensor_order
from utils.stats import mean_stderr

logger = logging.getLogger("replica_lab.gibbs_oracle")

Observable = Callable[[np.ndarray], float]
PairObservable = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Hamiltonians for one sample
# ---------------------------------------------------------------------------

def _check_length(x: np.ndarray, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


def coupling_term(model: ModelSpec, x, sample: QuenchedSample, snr: float, block: int = 0) -> float:
    """λ·(quadratic part) − √λ·(noise part) of the coupling channel at SNR λ."""
    x = _check_length(x, sample.n, "x")
    if snr == 0.0:
        return 0.0
    s = sample.signal
    z = sample.coupling_noise[block]
    if isinstance(model, Rle):
        proj = sample.phi @ (x - s)
        return snr * 0.5 * float(proj @ proj) - math.sqrt(snr) * float(proj @ z)
    p = tensor_order(model)
    idx = interaction_index(sample.n, p)
    coef = interaction_coefficient(sample.n, p)
    xprod = np.prod(x[idx], axis=1)
    sprod = np.prod(s[idx], axis=1)
    quad = coef * float(np.sum(0.5 * xprod ** 2 - xprod * sprod))
    lin = math.sqrt(coef) * float(np.dot(z, xprod))
    return snr * quad - math.sqrt(snr) * lin


def mean_field_term(x, signal, noise, snr: float) -> float:
    """snr·Σ(x²/2 − x s) − √snr·Σ x z for a decoupled Gaussian channel."""
    if snr == 0.0:
        return 0.0
    x = np.asarray(x, dtype=float)
    return snr * float(np.sum(0.5 * x ** 2 - x * signal)) - math.sqrt(snr) * float(np.dot(x, noise))


def hamiltonian(model: ModelSpec, x, sample: QuenchedSample) -> float:
    """Hamiltonian of the original model (first coupling block, SNR 1/Δ).

    Matrix: (1/Δ)Σ_{i≤j}(x_i²x_j²/(2n) − x_i x_j s_i s_j/n − √(Δ/n) x_i x_j z_ij).
    """
    return coupling_term(model, x, sample, 1.0 / model.delta)


def perturbation(x, sample: QuenchedSample, epsilon: float) -> float:
    """Side-channel term ε Σ(x²/2 − x s − x ẑ/√ε); exactly 0 at ε = 0."""
    return mean_field_term(x, sample.signal, sample.perturb_noise, epsilon)


def overlap(x, s) -> float:
    """q_{x,s} = (1/n) Σ x_i s_i."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape != s.shape:
        raise ValueError(f"overlap of shapes {x.shape} and {s.shape}")
    return float(np.dot(x, s) / x.shape[-1])


# ---------------------------------------------------------------------------
# Gibbs states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GibbsState:
    configurations: np.ndarray   # (C, n)
    log_weights: np.ndarray      # (C,), normalized
    n: int

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights)


def _original_snrs(model: ModelSpec, blocks: int) -> np.ndarray:
    snr = np.zeros(blocks)
    snr[0] = 1.0 / model.delta
    return snr


def enumerate_gibbs(model: ModelSpec, prior: Prior, sample: QuenchedSample, epsilon: float = 0.0) -> GibbsState:
    """Posterior of the original model plus the ε side channel.

    Raises:
        EnumerationCapError: If |atoms|^n exceeds the cap.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    batch = DisorderBatch(model, prior, sample.n, rows_from_samples([sample]))
    lw = batch.log_weights(_original_snrs(model, sample.blocks), None, epsilon)[0]
    return GibbsState(configurations=batch.configs, log_weights=lw, n=sample.n)


def gibbs_expect(state: GibbsState, observable: Observable) -> float:
    """⟨A(X)⟩ as an exact weighted sum."""
    values = np.array([observable(x) for x in state.configurations], dtype=float)
    return float(np.dot(state.probabilities, values))


def gibbs_expect2(state: GibbsState, observable: Callable[[np.ndarray, np.ndarray], float]) -> float:
    """⟨A(X, X′)⟩ over two independent replicas; quadratic in the number of configurations."""
    probs = state.probabilities
    configs = state.configurations
    total = 0.0
    for i, x in enumerate(configs):
        row = np.array([observable(x, y) for y in configs], dtype=float)
        total += probs[i] * float(np.dot(probs, row))
    return total


# ---------------------------------------------------------------------------
# Bayes-consistency oracle
# ---------------------------------------------------------------------------

def observe(model: ModelSpec, sample: QuenchedSample) -> np.ndarray:
    """Raw observation from the first block.

    Matrix/tensor: √c·s_{i1}...s_{ip} + √Δ·z per stored index tuple; RLE: Φs + √Δ·z.
    """
    z = sample.coupling_noise[0]
    if isinstance(model, Rle):
        return sample.phi @ sample.signal + math.sqrt(model.delta) * z
    p = tensor_order(model)
    idx = interaction_index(sample.n, p)
    coef = interaction_coefficient(sample.n, p)
    return math.sqrt(coef) * np.prod(sample.signal[idx], axis=1) + math.sqrt(model.delta) * z


def direct_posterior_log_weights(
    model: ModelSpec,
    prior: Prior,
    sample: QuenchedSample,
    epsilon: float = 0.0,
) -> np.ndarray:
    """Posterior from the Gaussian likelihood of the raw observation, normalized.

    Side channel: ŷ = √ε s + ẑ.
    """
    n = sample.n
    check_enumerable(prior, n)
    configs = prior.configurations(n)
    logp = prior.configuration_log_prior(n).copy()
    w = observe(model, sample)
    if isinstance(model, Rle):
        residual = w[None, :] - configs @ sample.phi.T
    else:
        p = tensor_order(model)
        idx = interaction_index(n, p)
        coef = interaction_coefficient(n, p)
        residual = w[None, :] - math.sqrt(coef) * np.prod(configs[:, idx], axis=2)
    logp -= np.sum(residual ** 2, axis=1) / (2.0 * model.delta)
    if epsilon > 0:
        y_hat = math.sqrt(epsilon) * sample.signal + sample.perturb_noise
        logp -= 0.5 * np.sum((y_hat[None, :] - math.sqrt(epsilon) * configs) ** 2, axis=1)
    return logp - logsumexp(logp)


# ---------------------------------------------------------------------------
# Disorder-averaged oracles
# ---------------------------------------------------------------------------

def original_batch(model: ModelSpec, prior: Prior, n: int, epsilon: float, method: DisorderMethod) -> DisorderBatch:
    return build_batch(model, prior, n, method, blocks=1, side_channel=epsilon > 0)


def free_energy(
    model: ModelSpec,
    prior: Prior,
    n: int,
    epsilon: float,
    method: DisorderMethod,
) -> tuple[float, float]:
    """Disorder average of −(1/n) ln Z for the original model plus side channel.

    Returns:
        ``(mean, stderr)``; stderr is 0 for quadrature.
    """
    batch = original_batch(model, prior, n, epsilon, method)
    values = batch.free_energies([1.0 / model.delta], None, epsilon)
    return mean_stderr(values, batch.weights, batch.monte_carlo)


def free_energy_mc(
    model: ModelSpec,
    prior: Prior,
    n: int,
    epsilon: float,
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo free energy; identical for any thread count."""
    mean, stderr = free_energy(model, prior, n, epsilon, MonteCarloDisorder(samples, seed, threads))
    logger.debug(f"f_n(n={n}) = {mean:.6f} ± {stderr:.6f} over {samples} samples")
    return mean, stderr


def finite_size_shift(model: ModelSpec, prior: Prior, n: int, m_star: float) -> float:
    """Leading O(1/n) part of f_n − f_RS for the matrix model; 0 for other models.

    The i ≤ j Hamiltonian exceeds the completed square by the diagonal
    Σ_i (x_i⁴/4 − x_i²s_i²/2)/(nΔ). On the signal branch (x ≈ s) it lowers f_n
    by E[S⁴]/(4Δn); with m_star = 0 (posterior ≈ prior) by
    (E[S²]²/2 − E[S⁴]/4)/(Δn). Both are exact for ±1 signals. A sign-symmetric
    prior on the signal branch has two mirror posterior modes, lowering f_n by a
    further ln2/n.
    """
    if not isinstance(model, Matrix):
        return 0.0
    m4 = moment(prior, 4)
    if m_star > 0:
        shift = -m4 / (4.0 * model.delta * n)
        if is_sign_symmetric(prior):
            shift -= math.log(2.0) / n
        return shift
    return (m4 / 4.0 - moment(prior, 2) ** 2 / 2.0) / (model.delta * n)


def mutual_information_mc(
    model: ModelSpec,
    prior: Prior,
    n: int,
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
) -> tuple[float, float]:
    mean, stderr = free_energy_mc(model, prior, n, 0.0, samples, seed, threads)
    return mutual_information(model, prior, mean), stderr


# ---------------------------------------------------------------------------
# Nishimori identity
# ---------------------------------------------------------------------------

def overlap_observable(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.mean(x * y, axis=-1)


def overlap_squared_observable(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.mean(x * y, axis=-1) ** 2


def first_fourth_power_observable(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x₁⁴; the second argument only fixes the broadcast shape."""
    shape = np.broadcast_shapes(x.shape, y.shape)[:-1]
    return np.broadcast_to(x[..., 0] ** 4, shape)


NISHIMORI_OBSERVABLES: dict[str, PairObservable] = {
    "q": overlap_observable,
    "q2": overlap_squared_observable,
    "x4": first_fourth_power_observable,
}


@dataclass(frozen=True)
class NishimoriResult:
    lhs: float
    rhs: float
    residual: float
    stderr: float


def nishimori_residual(
    model: ModelSpec,
    prior: Prior,
    n: int,
    epsilon: float,
    observable: PairObservable,
    method: DisorderMethod,
) -> NishimoriResult:
    """E⟨g(X, S)⟩ against E⟨g(X, X′)⟩.

    ``observable`` must broadcast over leading axes of its two ``(..., n)``
    arguments.

    Raises:
        QuadratureDimensionError: For quadrature over too many noise coordinates.
    """
    batch = original_batch(model, prior, n, epsilon, method)
    probs = np.exp(batch.log_weights([1.0 / model.delta], None, epsilon))     # (R, C)
    configs = batch.configs

    signal_side = observable(configs[None, :, :], batch.signals[:, None, :])  # (R, C)
    replica_side = observable(configs[:, None, :], configs[None, :, :])       # (C, C)
    lhs_rows = np.sum(probs * signal_side, axis=1)
    rhs_rows = np.einsum("rc,cd,rd->r", probs, replica_side, probs)

    lhs, _ = mean_stderr(lhs_rows, batch.weights, batch.monte_carlo)
    rhs, _ = mean_stderr(rhs_rows, batch.weights, batch.monte_carlo)
    residual, stderr = mean_stderr(lhs_rows - rhs_rows, batch.weights, batch.monte_carlo)
    return NishimoriResult(lhs=lhs, rhs=rhs, residual=residual, stderr=stderr)
