"""Quenched disorder: samples, batches and the two averaging methods.

A :class:`DisorderBatch` holds, for many disorder rows at once, the per-configuration
statistics that every Hamiltonian in this package is a linear combination of.
Monte Carlo rows carry weight 1/S; quadrature rows are the tensor product of the
exact signal distribution with a Gauss–Hermite rule over every noise coordinate.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.special import logsumexp

from config import settings
from replica_lab.prior import Prior
from replica_lab.rs_potential import ModelSpec, Rle, tensor_order
from services.executor_service import chunk_ranges, map_ordered
from utils.quadrature import product_gauss_hermite

logger = logging.getLogger("replica_lab.disorder")


class EnumerationCapError(RuntimeError):
    """Raised when |atoms|^n exceeds the enumeration cap."""
    pass


class QuadratureDimensionError(ValueError):
    """Raised when disorder quadrature would span too many noise coordinates."""
    pass


# ---------------------------------------------------------------------------
# Averaging methods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloDisorder:
    samples: int
    seed: int = settings.SEED
    threads: int | None = None

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError(f"samples must be >= 2, got {self.samples}")


@dataclass(frozen=True)
class QuadratureDisorder:
    order: int = 80

    def __post_init__(self):
        if self.order < 2:
            raise ValueError(f"quadrature order must be >= 2, got {self.order}")


DisorderMethod = Union[MonteCarloDisorder, QuadratureDisorder]


# ---------------------------------------------------------------------------
# Index sets
# ---------------------------------------------------------------------------

@lru_cache(maxsize=128)
def interaction_index(n: int, p: int) -> np.ndarray:
    """Sorted index tuples i1 ≤ ... ≤ ip, shape ``(T, p)``."""
    idx = np.array(list(itertools.combinations_with_replacement(range(n), p)), dtype=int)
    idx.setflags(write=False)
    return idx


def interaction_coefficient(n: int, p: int) -> float:
    """(p−1)!/n^{p−1}; 1/n for the matrix model."""
    return math.factorial(p - 1) / n ** (p - 1)


def rle_rows(model: Rle, n: int) -> int:
    """Number of measurements round(αn), at least one."""
    return max(1, int(round(model.alpha * n)))


def coupling_width(model: ModelSpec, n: int) -> int:
    """Noise coordinates per coupling block."""
    if isinstance(model, Rle):
        return rle_rows(model, n)
    return interaction_index(n, tensor_order(model)).shape[0]


def check_enumerable(prior: Prior, n: int) -> int:
    count = prior.size ** n
    if count > settings.ENUMERATION_CAP:
        raise EnumerationCapError(
            f"{prior.size}^{n} = {count} configurations exceeds the enumeration cap "
            f"{settings.ENUMERATION_CAP}"
        )
    return count


# ---------------------------------------------------------------------------
# Quenched samples
# ---------------------------------------------------------------------------

def sample_seed_sequence(seed: int, index: int) -> np.random.SeedSequence:
    """Counter-based child seed for sample ``index`` of run ``seed``."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


@dataclass(frozen=True)
class QuenchedSample:
    """One realization Θ of every quenched variable.

    ``coupling_noise`` stores, per block, the i1 ≤ ... ≤ ip entries of the
    symmetric noise (matrix/tensor) or the measurement noise vector (RLE).
    """

    signal: np.ndarray           # (n,)
    coupling_noise: np.ndarray   # (blocks, T)
    mf_noise: np.ndarray         # (blocks, n)
    perturb_noise: np.ndarray    # (n,)
    phi: np.ndarray | None       # (rows, n) for RLE
    seed: int
    index: int

    @property
    def n(self) -> int:
        return int(self.signal.shape[0])

    @property
    def blocks(self) -> int:
        return int(self.coupling_noise.shape[0])

    def symmetric_noise(self, p: int, block: int = 0) -> np.ndarray:
        """Full symmetric order-p array z_{i1..ip} built from the stored entries."""
        n = self.n
        out = np.zeros((n,) * p)
        for value, idx in zip(self.coupling_noise[block], interaction_index(n, p)):
            for perm in set(itertools.permutations(idx)):
                out[perm] = value
        return out


def draw_sample(model: ModelSpec, prior: Prior, n: int, seed: int, index: int, blocks: int = 1) -> QuenchedSample:
    """Regenerate sample ``index`` of run ``seed``; bit-exact for equal arguments."""
    if n < 1 or blocks < 1:
        raise ValueError(f"need n >= 1 and blocks >= 1, got n={n}, blocks={blocks}")
    seq = sample_seed_sequence(seed, index)
    rng = np.random.default_rng(seq)
    signal = prior.sample(rng, n)
    width = coupling_width(model, n)
    coupling = rng.standard_normal((blocks, width))
    mf = rng.standard_normal((blocks, n))
    perturb = rng.standard_normal(n)
    phi = None
    if isinstance(model, Rle):
        phi = rng.standard_normal((width, n)) / math.sqrt(n)
    return QuenchedSample(
        signal=signal,
        coupling_noise=coupling,
        mf_noise=mf,
        perturb_noise=perturb,
        phi=phi,
        seed=int(seq.generate_state(1, np.uint64)[0]),
        index=index,
    )


# ---------------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DisorderRows:
    """Raw disorder for R rows, before any configuration statistics."""

    signals: np.ndarray          # (R, n)
    coupling_noise: np.ndarray   # (R, B, T)
    mf_noise: np.ndarray         # (R, B, n)
    perturb_noise: np.ndarray    # (R, n)
    phi: np.ndarray | None       # (R, rows, n)
    weights: np.ndarray          # (R,)
    monte_carlo: bool


def rows_from_samples(samples: list[QuenchedSample]) -> DisorderRows:
    count = len(samples)
    phi = None
    if samples[0].phi is not None:
        phi = np.stack([s.phi for s in samples])
    return DisorderRows(
        signals=np.stack([s.signal for s in samples]),
        coupling_noise=np.stack([s.coupling_noise for s in samples]),
        mf_noise=np.stack([s.mf_noise for s in samples]),
        perturb_noise=np.stack([s.perturb_noise for s in samples]),
        phi=phi,
        weights=np.full(count, 1.0 / count),
        monte_carlo=True,
    )


def monte_carlo_rows(
    model: ModelSpec,
    prior: Prior,
    n: int,
    method: MonteCarloDisorder,
    blocks: int = 1,
) -> DisorderRows:
    """Draw ``method.samples`` samples, in parallel chunks, in index order."""
    threads = settings.THREADS if method.threads is None else method.threads

    def draw_chunk(indices: range) -> list[QuenchedSample]:
        return [draw_sample(model, prior, n, method.seed, i, blocks) for i in indices]

    chunks = map_ordered(draw_chunk, chunk_ranges(method.samples, max(1, threads) * 4), threads)
    return rows_from_samples([s for chunk in chunks for s in chunk])


def quadrature_rows(
    model: ModelSpec,
    prior: Prior,
    n: int,
    method: QuadratureDisorder,
    side_channel: bool,
) -> DisorderRows:
    """Exact signal sum times a product Gauss–Hermite rule over the noise.

    One coupling block is integrated (plus Φ for RLE) and, when
    ``side_channel`` is set, the n perturbation coordinates.
    """
    width = coupling_width(model, n)
    phi_dims = width * n if isinstance(model, Rle) else 0
    dims = width + phi_dims + (n if side_channel else 0)
    if dims > settings.QUADRATURE_MAX_DIMS:
        raise QuadratureDimensionError(
            f"disorder quadrature over {dims} noise coordinates exceeds the limit "
            f"{settings.QUADRATURE_MAX_DIMS}; use Monte Carlo"
        )

    signals = prior.configurations(n)
    signal_w = np.exp(prior.configuration_log_prior(n))
    keep = signal_w > 0
    signals, signal_w = signals[keep], signal_w[keep]

    nodes_per_signal = max(1, settings.QUADRATURE_NODE_CAP // signals.shape[0])
    order = method.order
    if dims > 0:
        order = min(order, int(math.floor(nodes_per_signal ** (1.0 / dims) + 1e-9)))
    if order < 2:
        raise QuadratureDimensionError(f"node cap leaves fewer than 2 nodes per coordinate over {dims} dims")
    if order < method.order:
        logger.debug(f"Disorder quadrature order reduced {method.order} -> {order} over {dims} dims")
    nodes, node_w = product_gauss_hermite(dims, order)

    s_count, q_count = signals.shape[0], nodes.shape[0]
    rows = s_count * q_count
    all_signals = np.repeat(signals, q_count, axis=0)
    tiled = np.tile(nodes, (s_count, 1))
    weights = np.repeat(signal_w, q_count) * np.tile(node_w, s_count)

    col = 0
    coupling = tiled[:, col:col + width].reshape(rows, 1, width)
    col += width
    phi = None
    if phi_dims:
        phi = tiled[:, col:col + phi_dims].reshape(rows, width, n) / math.sqrt(n)
        col += phi_dims
    if side_channel:
        perturb = tiled[:, col:col + n]
    else:
        perturb = np.zeros((rows, n))
    return DisorderRows(
        signals=all_signals,
        coupling_noise=coupling,
        mf_noise=np.zeros((rows, 0, n)),
        perturb_noise=perturb,
        phi=phi,
        weights=weights,
        monte_carlo=False,
    )


class DisorderBatch:
    """Per-row, per-configuration Hamiltonian building blocks.

    Every Hamiltonian is assembled from SNR-weighted blocks:

        H = Σ_b λ_b·Q − √λ_b·L_b  +  Σ_b μ_b·Q_mf − √μ_b·M_b  +  ε·Q_mf − √ε·P

    with Q the coupling quadratic part, L_b the coupling noise part of block b,
    Q_mf = Σ_i (x_i²/2 − x_i s_i), M_b = z̃_b·x and P = ẑ·x.
    """

    def __init__(self, model: ModelSpec, prior: Prior, n: int, rows: DisorderRows):
        check_enumerable(prior, n)
        self.model = model
        self.prior = prior
        self.n = n
        self.rows = rows
        self.weights = rows.weights
        self.monte_carlo = rows.monte_carlo
        self.signals = rows.signals
        self.configs = prior.configurations(n)                       # (C, n)
        self.log_prior = prior.configuration_log_prior(n)            # (C,)

        x = self.configs
        s = rows.signals
        if isinstance(model, Rle):
            centered = x[None, :, :] - s[:, None, :]                 # (R, C, n)
            proj = np.einsum("rmn,rcn->rmc", rows.phi, centered)     # (R, rows, C)
            self.coupling_quad = 0.5 * np.einsum("rmc,rmc->rc", proj, proj)
            self.coupling_lin = np.einsum("rbm,rmc->rbc", rows.coupling_noise, proj)
        else:
            p = tensor_order(model)
            idx = interaction_index(n, p)
            coef = interaction_coefficient(n, p)
            xprod = np.prod(x[:, idx], axis=2)                        # (C, T)
            sprod = np.prod(s[:, idx], axis=2)                        # (R, T)
            self.coupling_quad = coef * (0.5 * np.sum(xprod ** 2, axis=1)[None, :] - sprod @ xprod.T)
            self.coupling_lin = math.sqrt(coef) * np.einsum("rbt,ct->rbc", rows.coupling_noise, xprod)
        self.mf_quad = 0.5 * np.sum(x ** 2, axis=1)[None, :] - s @ x.T
        self.mf_lin = np.einsum("rbn,cn->rbc", rows.mf_noise, x)
        self.perturb_lin = rows.perturb_noise @ x.T
        self.overlaps = (s @ x.T) / n                                # q_{x,s}, (R, C)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def hamiltonian(self, coupling_snr, mf_snr=None, side_snr: float = 0.0) -> np.ndarray:
        """H for every row and configuration, shape ``(R, C)``."""
        coupling_snr = np.asarray(coupling_snr, dtype=float)
        H = self.coupling_quad * np.sum(coupling_snr) - np.einsum("rbc,b->rc", self.coupling_lin, np.sqrt(coupling_snr))
        if mf_snr is not None and len(mf_snr):
            mf_snr = np.asarray(mf_snr, dtype=float)
            H = H + self.mf_quad * np.sum(mf_snr) - np.einsum("rbc,b->rc", self.mf_lin, np.sqrt(mf_snr))
        if side_snr:
            H = H + side_snr * self.mf_quad - math.sqrt(side_snr) * self.perturb_lin
        return H

    def log_weights(self, coupling_snr, mf_snr=None, side_snr: float = 0.0) -> np.ndarray:
        """Normalized posterior log-weights, shape ``(R, C)``."""
        raw = self.log_prior[None, :] - self.hamiltonian(coupling_snr, mf_snr, side_snr)
        return raw - logsumexp(raw, axis=1, keepdims=True)

    def free_energies(self, coupling_snr, mf_snr=None, side_snr: float = 0.0) -> np.ndarray:
        """Per-row −(1/n) ln Z, shape ``(R,)``."""
        raw = self.log_prior[None, :] - self.hamiltonian(coupling_snr, mf_snr, side_snr)
        return -logsumexp(raw, axis=1) / self.n


def build_batch(
    model: ModelSpec,
    prior: Prior,
    n: int,
    method: DisorderMethod,
    blocks: int = 1,
    side_channel: bool = False,
) -> DisorderBatch:
    """Disorder batch for either averaging method.

    Quadrature batches always integrate a single coupling block.
    """
    check_enumerable(prior, n)
    if isinstance(method, QuadratureDisorder):
        rows = quadrature_rows(model, prior, n, method, side_channel)
    else:
        rows = monte_carlo_rows(model, prior, n, method, blocks)
    return DisorderBatch(model, prior, n, rows)