"""The (k, t)-interpolating path for the matrix model, and its executable checks.

Step k of K replaces one pairwise channel of SNR 1/(KΔ) by a decoupled
mean-field channel of SNR m_k/(KΔ); t ∈ [0, 1] moves along the step. Every
channel is written in SNR form ``λ·quadratic − √λ·noise`` so that switched-off
channels are exact zeros.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from config import settings
from replica_lab.disorder import DisorderBatch, MonteCarloDisorder, QuenchedSample, build_batch, draw_sample
from replica_lab.gibbs_oracle import coupling_term, free_energy, mean_field_term
from replica_lab.prior import Prior, moment
from replica_lab.rs_potential import Matrix, psi, rs_potential, v_k_variance
from replica_lab.scalar_channel import f_den_snr
from services.logging_service import log_stage
from utils.quadrature import gauss_legendre_unit
from utils.stats import loglog_slope, mean_stderr

logger = logging.getLogger("replica_lab.interpolation")

DFDT_SLACK = 1.0        # residual slack C/(nK)
SUM_RULE_SLACK = 2.0    # residual slack C/n
GAP_SLOPE_LIMIT = -0.5


# ---------------------------------------------------------------------------
# Path coordinates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathConfig:
    n: int
    K: int
    epsilon: float = 0.0
    t_grid: tuple[float, ...] = (0.0, 0.5, 1.0)

    def __post_init__(self):
        if self.n < 1 or self.K < 1:
            raise ValueError(f"need n >= 1 and K >= 1, got n={self.n}, K={self.K}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        ts = list(self.t_grid)
        if ts != sorted(ts) or any(not 0.0 <= t <= 1.0 for t in ts):
            raise ValueError(f"t_grid must be sorted within [0, 1], got {self.t_grid}")


@dataclass(frozen=True)
class TrialParameters:
    """Trial sequence m_1..m_K (E_1..E_K for RLE checks)."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("trial sequence must be nonempty")
        if any(v < 0 for v in self.values):
            raise ValueError(f"trial parameters must be nonnegative, got {self.values}")

    @classmethod
    def constant(cls, value: float, K: int) -> "TrialParameters":
        return cls(tuple([float(value)] * K))

    @property
    def K(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def check_against(self, prior: Prior) -> None:
        upper = moment(prior, 2)
        if any(v > upper for v in self.values):
            raise ValueError(f"trial parameters exceed E[S^2]={upper}: {self.values}")


@dataclass(frozen=True)
class PathPoint:
    k: int
    t: float
    epsilon: float
    effective_epsilon: float


def path_point(k: int, t: float, epsilon: float, m: TrialParameters, delta: float) -> PathPoint:
    """Build a path point; the only place ε̃ = ε + (KΔ)⁻¹(Σ_{l<k} m_l + t·m_k) is computed."""
    K = m.K
    if not 1 <= k <= K:
        raise ValueError(f"k must lie in 1..{K}, got {k}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    values = m.values
    accumulated = sum(values[: k - 1]) + t * values[k - 1]
    return PathPoint(k=k, t=t, epsilon=epsilon, effective_epsilon=epsilon + accumulated / (K * delta))


@dataclass(frozen=True)
class PathSnrs:
    coupling: np.ndarray   # (K,)
    mean_field: np.ndarray  # (K,)
    side: float


def path_snrs(point: PathPoint, m: TrialParameters, delta: float) -> PathSnrs:
    """Per-block SNRs at ``point``.

    Coupling blocks after k carry 1/(KΔ), block k carries (1−t)/(KΔ); mean-field
    blocks before k carry m_l/(KΔ), block k carries t·m_k/(KΔ).
    """
    K = m.K
    k = point.k
    coupling_w = np.array([0.0] * (k - 1) + [1.0 - point.t] + [1.0] * (K - k))
    mf_w = np.array([1.0] * (k - 1) + [point.t] + [0.0] * (K - k))
    return PathSnrs(
        coupling=coupling_w / (K * delta),
        mean_field=(mf_w * m.array) / (K * delta),
        side=point.epsilon,
    )


def interp_hamiltonian(point: PathPoint, m: TrialParameters, x, sample: QuenchedSample, delta: float) -> float:
    """H_{k,t;ε}(x) for one sample carrying K coupling and K mean-field blocks."""
    if sample.blocks != m.K:
        raise ValueError(f"sample has {sample.blocks} blocks, trial sequence has {m.K}")
    snrs = path_snrs(point, m, delta)
    model = Matrix(delta)
    total = 0.0
    for b in range(m.K):
        total += coupling_term(model, x, sample, float(snrs.coupling[b]), block=b)
    for b in range(m.K):
        total += mean_field_term(x, sample.signal, sample.mf_noise[b], float(snrs.mean_field[b]))
    total += mean_field_term(x, sample.signal, sample.perturb_noise, snrs.side)
    return total


# ---------------------------------------------------------------------------
# Path free energies on a shared disorder batch
# ---------------------------------------------------------------------------

def path_batch(
    prior: Prior,
    delta: float,
    n: int,
    K: int,
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
) -> DisorderBatch:
    """Disorder with K coupling and K mean-field blocks per sample."""
    return build_batch(Matrix(delta), prior, n, MonteCarloDisorder(samples, seed, threads), blocks=K)


def _log_weights(batch: DisorderBatch, point: PathPoint, m: TrialParameters, delta: float) -> np.ndarray:
    snrs = path_snrs(point, m, delta)
    return batch.log_weights(snrs.coupling, snrs.mean_field, snrs.side)


def path_free_energy_rows(batch: DisorderBatch, point: PathPoint, m: TrialParameters, delta: float) -> np.ndarray:
    snrs = path_snrs(point, m, delta)
    return batch.free_energies(snrs.coupling, snrs.mean_field, snrs.side)


def overlap_moments(batch: DisorderBatch, point: PathPoint, m: TrialParameters, delta: float) -> dict[str, np.ndarray]:
    """Per-row ⟨q⟩, ⟨q²⟩ and ⟨n⁻² Σ X_i² S_i²⟩ at ``point``."""
    probs = np.exp(_log_weights(batch, point, m, delta))
    q = batch.overlaps
    diag = (batch.signals ** 2 @ (batch.configs ** 2).T) / batch.n ** 2
    return {
        "q": np.sum(probs * q, axis=1),
        "q2": np.sum(probs * q ** 2, axis=1),
        "diag": np.sum(probs * diag, axis=1),
    }


def path_free_energy(
    point: PathPoint,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo (mean, stderr) of −(1/n) ln Z under H_{k,t;ε}."""
    batch = path_batch(prior, delta, n, m.K, samples, seed, threads)
    return mean_stderr(path_free_energy_rows(batch, point, m, delta))


@dataclass
class TelescopingReport:
    max_abs_difference: float
    differences: list[float]
    passed: bool


def telescoping_check(
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    epsilon: float,
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
) -> TelescopingReport:
    """f_{k,1;ε} against f_{k+1,0;ε} for every k < K on common disorder; equal bit for bit."""
    batch = path_batch(prior, delta, n, m.K, samples, seed, threads)
    diffs = []
    for k in range(1, m.K):
        end = path_free_energy_rows(batch, path_point(k, 1.0, epsilon, m, delta), m, delta)
        start = path_free_energy_rows(batch, path_point(k + 1, 0.0, epsilon, m, delta), m, delta)
        diffs.append(float(np.max(np.abs(end - start))))
    worst = max(diffs, default=0.0)
    return TelescopingReport(max_abs_difference=worst, differences=diffs, passed=worst == 0.0)


def pointwise_telescoping(
    prior: Prior,
    delta: float,
    n: int,
    K: int,
    trials: int,
    seed: int = settings.SEED,
    tol: float = 1e-12,
) -> TelescopingReport:
    """|H_{k,1;ε}(x) − H_{k+1,0;ε}(x)| over random (x, sample, m, ε, k)."""
    if K < 2:
        raise ValueError(f"telescoping needs K >= 2, got {K}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, K]))
    upper = moment(prior, 2)
    diffs = []
    for trial in range(trials):
        sample = draw_sample(Matrix(delta), prior, n, seed, trial, blocks=K)
        x = prior.sample(rng, n)
        m = TrialParameters(tuple(rng.uniform(0.0, upper, K)))
        eps = float(rng.uniform(0.0, 1.0))
        k = int(rng.integers(1, K))
        end = interp_hamiltonian(path_point(k, 1.0, eps, m, delta), m, x, sample, delta)
        start = interp_hamiltonian(path_point(k + 1, 0.0, eps, m, delta), m, x, sample, delta)
        diffs.append(abs(end - start))
    worst = max(diffs, default=0.0)
    return TelescopingReport(max_abs_difference=worst, differences=diffs, passed=worst < tol)


# ---------------------------------------------------------------------------
# Endpoints and Gaussian stability
# ---------------------------------------------------------------------------

@dataclass
class EndpointReport:
    start: float
    start_stderr: float
    original: float
    original_stderr: float
    end: float
    end_stderr: float
    decoupled: float
    start_passed: bool
    end_passed: bool


def endpoint_checks(
    prior: Prior,
    delta: float,
    n: int,
    m: TrialParameters,
    epsilon: float,
    samples: int,
    seed: int = settings.SEED,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    threads: int | None = None,
) -> EndpointReport:
    """f_{1,0;ε} against the original model, f_{K,1;ε} against the scalar channel.

    The original model is averaged on an independent disorder stream.
    """
    batch = path_batch(prior, delta, n, m.K, samples, seed, threads)
    start, start_se = mean_stderr(path_free_energy_rows(batch, path_point(1, 0.0, epsilon, m, delta), m, delta))
    end, end_se = mean_stderr(path_free_energy_rows(batch, path_point(m.K, 1.0, epsilon, m, delta), m, delta))
    original, original_se = free_energy(Matrix(delta), prior, n, epsilon, MonteCarloDisorder(samples, seed + 1, threads))
    decoupled = f_den_snr(prior, float(np.mean(m.array)) / delta + epsilon)
    return EndpointReport(
        start=start,
        start_stderr=start_se,
        original=original,
        original_stderr=original_se,
        end=end,
        end_stderr=end_se,
        decoupled=decoupled,
        start_passed=abs(start - original) <= sigmas * math.hypot(start_se, original_se),
        end_passed=abs(end - decoupled) <= sigmas * end_se + 1e-12,
    )


@dataclass
class StabilityReport:
    variance: float
    fourth_moment: float
    variance_band: tuple[float, float]
    passed: bool


def gaussian_stability_check(
    K: int,
    samples: int,
    seed: int = settings.SEED,
    weights: Sequence[float] | None = None,
) -> StabilityReport:
    """Variance and fourth moment of Σ_k w_k z^(k) with unit-norm weights (1/√K by default)."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    w = np.full(K, 1.0 / math.sqrt(K)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (K,):
        raise ValueError(f"weights have shape {w.shape}, expected ({K},)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, K]))
    combined = np.zeros(samples)
    for start in range(0, samples, 10_000):
        stop = min(start + 10_000, samples)
        combined[start:stop] = rng.standard_normal((stop - start, K)) @ w
    variance = float(np.mean(combined ** 2))
    fourth = float(np.mean(combined ** 4))
    half_width = 5.0 / math.sqrt(samples)
    band = (1.0 - half_width, 1.0 + half_width)
    fourth_ok = abs(fourth - 3.0) <= 5.0 * math.sqrt(96.0 / samples)
    return StabilityReport(
        variance=variance,
        fourth_moment=fourth,
        variance_band=band,
        passed=band[0] <= variance <= band[1] and fourth_ok,
    )


# ---------------------------------------------------------------------------
# Derivative in t
# ---------------------------------------------------------------------------

@dataclass
class DerivativeReport:
    fd_value: float
    formula_value: float
    finite_size_correction: float
    residual: float
    stderr: float
    slack: float
    passed: bool


def dfdt_check(
    point: PathPoint,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    samples: int,
    seed: int = settings.SEED,
    dt: float = 1e-3,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    threads: int | None = None,
) -> DerivativeReport:
    """Central difference of f_{k,t;ε} in t against (1/(4ΔK))·E⟨q² − 2m_k q⟩.

    The formula drops the diagonal term (1/(4ΔK))·E⟨n⁻² Σ X_i² S_i²⟩, which is
    reported separately; the residual is accepted within C/(nK) + sigmas·stderr.
    """
    if dt <= 0 or not (0.0 < point.t - dt and point.t + dt < 1.0):
        raise ValueError(f"need 0 < t - dt and t + dt < 1, got t={point.t}, dt={dt}")
    K = m.K
    batch = path_batch(prior, delta, n, K, samples, seed, threads)
    ahead = path_point(point.k, point.t + dt, point.epsilon, m, delta)
    behind = path_point(point.k, point.t - dt, point.epsilon, m, delta)
    fd_rows = (path_free_energy_rows(batch, ahead, m, delta) - path_free_energy_rows(batch, behind, m, delta)) / (2 * dt)

    mom = overlap_moments(batch, point, m, delta)
    m_k = m.values[point.k - 1]
    scale = 1.0 / (4.0 * delta * K)
    formula_rows = scale * (mom["q2"] - 2.0 * m_k * mom["q"])

    fd_value, _ = mean_stderr(fd_rows)
    formula_value, _ = mean_stderr(formula_rows)
    correction, _ = mean_stderr(scale * mom["diag"])
    residual, stderr = mean_stderr(fd_rows - formula_rows)
    slack = DFDT_SLACK / (n * K)
    return DerivativeReport(
        fd_value=fd_value,
        formula_value=formula_value,
        finite_size_correction=correction,
        residual=residual,
        stderr=stderr,
        slack=slack,
        passed=abs(residual) < sigmas * stderr + slack,
    )


# ---------------------------------------------------------------------------
# Sum rule
# ---------------------------------------------------------------------------

@dataclass
class SumRuleReport:
    lhs: float
    rhs: float
    residual: float
    stderr: float
    slack: float
    endpoint_shift: float
    rs_term: float
    variance_term: float
    remainder: float
    remainder_stderr: float
    rhs_without_remainder: float
    finite_size_correction: float
    min_integrand: float
    remainder_nonnegative: bool
    upper_bound_holds: bool
    passed: bool
    trial: list[float] = field(default_factory=list)


def sum_rule_residual(
    config: PathConfig,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    samples: int,
    seed: int = settings.SEED,
    t_quad_order: int = settings.T_QUAD_ORDER,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    threads: int | None = None,
    batch: DisorderBatch | None = None,
) -> SumRuleReport:
    """Both sides of the sum rule on one shared disorder batch.

    RHS = (f_{K,1;ε} − f_{K,1;0}) + f_RS(mean m) + V_K/(4Δ)
          − (1/(4ΔK)) Σ_k ∫₀¹ E⟨(q − m_k)²⟩_{k,t;ε} dt.
    The endpoint shift is the scalar-channel difference at SNR mean(m)/Δ + ε
    and mean(m)/Δ, which the decoupled endpoint equals exactly.
    """
    K, n, eps = config.K, config.n, config.epsilon
    if m.K != K:
        raise ValueError(f"trial sequence has {m.K} entries, config has K={K}")
    started = time.perf_counter()
    if batch is None:
        batch = path_batch(prior, delta, n, K, samples, seed, threads)
    lhs_rows = path_free_energy_rows(batch, path_point(1, 0.0, eps, m, delta), m, delta)

    m_bar = float(np.mean(m.array))
    endpoint_shift = f_den_snr(prior, m_bar / delta + eps) - f_den_snr(prior, m_bar / delta)
    rs_term = rs_potential(Matrix(delta), prior, m_bar)
    variance_term = v_k_variance(m.values) / (4.0 * delta)

    rule = gauss_legendre_unit(t_quad_order)
    scale = 1.0 / (4.0 * delta * K)
    remainder_rows = np.zeros(batch.size)
    correction_rows = np.zeros(batch.size)
    min_integrand = math.inf
    for k in range(1, K + 1):
        m_k = m.values[k - 1]
        for t, w in zip(rule.nodes, rule.weights):
            mom = overlap_moments(batch, path_point(k, float(t), eps, m, delta), m, delta)
            integrand = mom["q2"] - 2.0 * m_k * mom["q"] + m_k ** 2
            min_integrand = min(min_integrand, float(np.mean(integrand)))
            remainder_rows += scale * w * integrand
            correction_rows += scale * w * mom["diag"]

    constant = endpoint_shift + rs_term + variance_term
    lhs, _ = mean_stderr(lhs_rows)
    remainder, remainder_se = mean_stderr(remainder_rows)
    correction, _ = mean_stderr(correction_rows)
    residual, stderr = mean_stderr(lhs_rows - (constant - remainder_rows))
    slack = SUM_RULE_SLACK / n
    log_stage("sum_rule", (time.perf_counter() - started) * 1000.0, True)
    return SumRuleReport(
        lhs=lhs,
        rhs=constant - remainder,
        residual=residual,
        stderr=stderr,
        slack=slack,
        endpoint_shift=endpoint_shift,
        rs_term=rs_term,
        variance_term=variance_term,
        remainder=remainder,
        remainder_stderr=remainder_se,
        rhs_without_remainder=constant,
        finite_size_correction=correction,
        min_integrand=min_integrand,
        remainder_nonnegative=remainder >= -sigmas * remainder_se,
        upper_bound_holds=lhs <= constant + sigmas * stderr + slack,
        passed=abs(residual) < sigmas * stderr + slack,
        trial=list(m.values),
    )


# ---------------------------------------------------------------------------
# Adaptive trial parameters and weak t-dependence
# ---------------------------------------------------------------------------

def adapt_parameters(
    config: PathConfig,
    prior: Prior,
    delta: float,
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
    batch: DisorderBatch | None = None,
) -> tuple[TrialParameters, list[float]]:
    """m_k = E⟨q⟩ at (k, 0; ε), fixed sequentially in k and clamped to [0, E[S²]].

    Returns:
        The trial sequence and the stderr of each estimate.
    """
    K = config.K
    if batch is None:
        batch = path_batch(prior, delta, config.n, K, samples, seed, threads)
    upper = moment(prior, 2)
    values = [0.0] * K
    stderrs = [0.0] * K
    for k in range(1, K + 1):
        current = TrialParameters(tuple(values))
        mom = overlap_moments(batch, path_point(k, 0.0, config.epsilon, current, delta), current, delta)
        estimate, se = mean_stderr(mom["q"])
        values[k - 1] = min(max(estimate, 0.0), upper)
        stderrs[k - 1] = se
    logger.info(f"✅ adapted trial sequence: {[round(v, 4) for v in values]}")
    return TrialParameters(tuple(values)), stderrs


def t_dependence_gap(
    k: int,
    m: TrialParameters,
    config: PathConfig,
    prior: Prior,
    delta: float,
    samples: int,
    seed: int = settings.SEED,
    t: float = 0.5,
    threads: int | None = None,
) -> tuple[float, float]:
    """|E⟨q⟩_{k,t;ε} − E⟨q⟩_{k,0;ε}| on common disorder, with its stderr. t defaults to mid-step."""
    if config.K < config.n:
        raise ValueError(f"weak t-dependence needs K >= n, got K={config.K}, n={config.n}")
    batch = path_batch(prior, delta, config.n, config.K, samples, seed, threads)
    at_t = overlap_moments(batch, path_point(k, t, config.epsilon, m, delta), m, delta)["q"]
    at_0 = overlap_moments(batch, path_point(k, 0.0, config.epsilon, m, delta), m, delta)["q"]
    diff, stderr = mean_stderr(at_t - at_0)
    return abs(diff), stderr


@dataclass
class GapScaling:
    K_list: list[int]
    gaps: list[float]
    stderrs: list[float]
    slope: float
    passed: bool


def t_gap_scaling(
    n: int,
    K_list: Sequence[int],
    m_value: float,
    prior: Prior,
    delta: float,
    epsilon: float,
    samples: int,
    seed: int = settings.SEED,
    k: int = 1,
    t: float = 0.5,
    threads: int | None = None,
) -> GapScaling:
    """Gap at fixed (k, t) for each K with constant trial value; log–log slope in K."""
    gaps, stderrs = [], []
    for K in K_list:
        m = TrialParameters.constant(m_value, K)
        gap, se = t_dependence_gap(k, m, PathConfig(n, K, epsilon), prior, delta, samples, seed, t, threads)
        gaps.append(gap)
        stderrs.append(se)
    slope = loglog_slope(list(K_list), gaps)
    return GapScaling(
        K_list=list(K_list),
        gaps=gaps,
        stderrs=stderrs,
        slope=slope,
        passed=bool(slope <= GAP_SLOPE_LIMIT),
    )


# ---------------------------------------------------------------------------
# Perturbation bound
# ---------------------------------------------------------------------------

@dataclass
class PerturbationBoundReport:
    difference: float
    stderr: float
    bound: float
    passed: bool


def perturbation_bound_check(
    config: PathConfig,
    prior: Prior,
    delta: float,
    samples: int,
    seed: int = settings.SEED,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    threads: int | None = None,
) -> PerturbationBoundReport:
    """|f_{1,0;ε} − f_{1,0;0}| ≤ ε·E[S²]/2 on common disorder."""
    m = TrialParameters.constant(0.0, config.K)
    batch = path_batch(prior, delta, config.n, config.K, samples, seed, threads)
    with_eps = path_free_energy_rows(batch, path_point(1, 0.0, config.epsilon, m, delta), m, delta)
    without = path_free_energy_rows(batch, path_point(1, 0.0, 0.0, m, delta), m, delta)
    diff, stderr = mean_stderr(with_eps - without)
    bound = config.epsilon * moment(prior, 2) / 2.0
    return PerturbationBoundReport(
        difference=abs(diff),
        stderr=stderr,
        bound=bound,
        passed=abs(diff) <= bound + sigmas * stderr,
    )


# ---------------------------------------------------------------------------
# RLE path constraint
# ---------------------------------------------------------------------------

def rle_gamma_lambda(t: float, E: float, alpha: float, delta: float) -> tuple[float, float]:
    """Linear γ(t) = (1−t)/Δ and λ(t) = Σ(E)⁻² − α/(γ⁻¹ + E).

    λ(0) = 0 and λ(1) = α/(Δ+E) hold exactly.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if E < 0:
        raise ValueError(f"E must be nonnegative, got {E}")
    gamma = (1.0 - t) / delta
    snr = alpha / (delta + E)
    if gamma == 0.0:
        return gamma, snr
    return gamma, snr - alpha / (delta / (1.0 - t) + E)


@dataclass(frozen=True)
class PsiIdentityResult:
    closed_form: float
    integral: float
    residual: float


def psi_integral_identity(E: float, alpha: float, delta: float, t_quad_order: int = 32) -> PsiIdentityResult:
    """ψ(E) against (α/2)∫₀¹ γ′(t)(E/(1+γE)² − E/(1+γE)) dt with γ linear."""
    if E < 0:
        raise ValueError(f"E must be nonnegative, got {E}")
    rule = gauss_legendre_unit(t_quad_order)
    gamma_prime = -1.0 / delta
    gamma = (1.0 - rule.nodes) / delta
    integrand = gamma_prime * (E / (1.0 + gamma * E) ** 2 - E / (1.0 + gamma * E))
    integral = 0.5 * alpha * float(np.dot(rule.weights, integrand))
    closed = psi(alpha, delta, E)
    return PsiIdentityResult(closed_form=closed, integral=integral, residual=integral - closed)
