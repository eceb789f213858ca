"""The ℒ observable, fluctuation identities, ε̃-derivatives and concentration diagnostics.

Identities are evaluated on the reduced model at a path point: one pairwise
channel of SNR (K−k+1−t)/(KΔ) plus one side channel of SNR ε̃. By Gaussian
stability it has the same law as the (k, t; ε) model, and ∂H/∂ε̃ = nℒ holds
exactly, so every identity here is realized without an extra interpolation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from config import settings
from replica_lab.disorder import DisorderBatch, DisorderMethod, MonteCarloDisorder, QuenchedSample, build_batch
from replica_lab.interpolation import PathPoint, TrialParameters, overlap_moments, path_batch, path_point
from replica_lab.prior import Prior, moment
from replica_lab.rs_potential import Matrix, ModelSpec, minimize_potential
from utils.stats import delta_method, loglog_slope, mean_stderr

logger = logging.getLogger("replica_lab.fluctuation")

QUADRATURE_ATOL = 1e-4


# ---------------------------------------------------------------------------
# ℒ and the reduced model
# ---------------------------------------------------------------------------

def _require_positive(point: PathPoint) -> float:
    eps = point.effective_epsilon
    if not eps > 0:
        raise ValueError(f"effective epsilon must be positive, got {eps}")
    return eps


def observable_L(x, sample: QuenchedSample, point: PathPoint) -> float:
    """(1/n) Σ_i (x_i²/2 − x_i s_i − x_i ẑ_i/(2√ε̃))."""
    eps = _require_positive(point)
    x = np.asarray(x, dtype=float)
    s = sample.signal
    z_hat = sample.perturb_noise
    return float(np.mean(0.5 * x ** 2 - x * s - x * z_hat / (2.0 * math.sqrt(eps))))


def reduced_coupling_snr(point: PathPoint, K: int, delta: float) -> float:
    """SNR of the single pairwise channel equivalent to the remaining coupling blocks."""
    return (K - point.k + 1 - point.t) / (K * delta)


@dataclass
class ReducedModel:
    batch: DisorderBatch
    coupling_snr: float
    side_snr: float

    def log_weights(self, side_snr: float | None = None) -> np.ndarray:
        side = self.side_snr if side_snr is None else side_snr
        return self.batch.log_weights([self.coupling_snr], None, side)

    def free_energies(self, side_snr: float | None = None) -> np.ndarray:
        side = self.side_snr if side_snr is None else side_snr
        return self.batch.free_energies([self.coupling_snr], None, side)

    def mean(self, rows: np.ndarray) -> tuple[float, float]:
        return mean_stderr(rows, self.batch.weights, self.batch.monte_carlo)


def reduced_model(
    point: PathPoint,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    method: DisorderMethod,
) -> ReducedModel:
    """Disorder batch of the reduced model at ``point``, for either averaging method."""
    side = _require_positive(point)
    batch = build_batch(Matrix(delta), prior, n, method, blocks=1, side_channel=True)
    return ReducedModel(batch=batch, coupling_snr=reduced_coupling_snr(point, m.K, delta), side_snr=side)


def _posterior_stats(model: ReducedModel, side_snr: float | None = None) -> dict[str, np.ndarray]:
    """Per-row ⟨X_i⟩, ⟨X_i X_j⟩, ⟨ℒ⟩ and ⟨ℒ²⟩."""
    side = model.side_snr if side_snr is None else side_snr
    batch = model.batch
    probs = np.exp(model.log_weights(side))                                # (R, C)
    x = batch.configs
    L = (batch.mf_quad - batch.perturb_lin / (2.0 * math.sqrt(side))) / batch.n
    return {
        "b": probs @ x,                                                    # (R, n)
        "A": np.einsum("rc,ci,cj->rij", probs, x, x),                      # (R, n, n)
        "L1": np.sum(probs * L, axis=1),
        "L2": np.sum(probs * L ** 2, axis=1),
    }


# ---------------------------------------------------------------------------
# Derivatives in ε̃
# ---------------------------------------------------------------------------

@dataclass
class FirstDerivativeReport:
    fd_value: float
    formula_value: float
    l_value: float
    residual: float
    stderr: float
    l_residual: float
    l_stderr: float
    passed: bool


def first_derivative_check(
    point: PathPoint,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    method: DisorderMethod,
    d_eps: float = 1e-3,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    atol: float = QUADRATURE_ATOL,
) -> FirstDerivativeReport:
    """Central difference of f in ε̃ against −(1/2n)Σ E⟨X_i⟩² and against E⟨ℒ⟩."""
    eps = _require_positive(point)
    if not eps - d_eps > 0:
        raise ValueError(f"need effective epsilon - d_eps > 0, got {eps} - {d_eps}")
    model = reduced_model(point, m, prior, delta, n, method)
    fd_rows = (model.free_energies(eps + d_eps) - model.free_energies(eps - d_eps)) / (2.0 * d_eps)
    stats = _posterior_stats(model)
    formula_rows = -0.5 * np.sum(stats["b"] ** 2, axis=1) / n

    fd_value, _ = model.mean(fd_rows)
    formula_value, _ = model.mean(formula_rows)
    l_value, _ = model.mean(stats["L1"])
    residual, stderr = model.mean(fd_rows - formula_rows)
    l_residual, l_stderr = model.mean(stats["L1"] - formula_rows)
    return FirstDerivativeReport(
        fd_value=fd_value,
        formula_value=formula_value,
        l_value=l_value,
        residual=residual,
        stderr=stderr,
        l_residual=l_residual,
        l_stderr=l_stderr,
        passed=abs(residual) <= sigmas * stderr + atol and abs(l_residual) <= sigmas * l_stderr + atol,
    )


@dataclass
class ConcavityReport:
    grid: list[float]
    second_differences: list[float]
    second_difference_stderrs: list[float]
    formula_values: list[float]
    residuals: list[float]
    residual_stderrs: list[float]
    concave: bool
    passed: bool


def concavity_check(
    point: PathPoint,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    method: DisorderMethod,
    spacing: float = 1e-2,
    half_width: int = 1,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    atol: float = QUADRATURE_ATOL,
) -> ConcavityReport:
    """Second differences of f on the ε̃-grid ε̃ + spacing·(−w..w).

    Each interior difference must be ≤ sigmas·stderr and must match
    d²f/dε̃² = −(1/2n) Σ_ij E[(⟨X_iX_j⟩ − ⟨X_i⟩⟨X_j⟩)²].
    """
    eps = _require_positive(point)
    if half_width < 1 or spacing <= 0:
        raise ValueError(f"need half_width >= 1 and spacing > 0, got {half_width}, {spacing}")
    grid = [eps + spacing * i for i in range(-half_width, half_width + 1)]
    if grid[0] <= 0:
        raise ValueError(f"grid reaches nonpositive effective epsilon {grid[0]}")
    model = reduced_model(point, m, prior, delta, n, method)
    f_rows = [model.free_energies(e) for e in grid]

    second, second_se, formula, residuals, residual_se = [], [], [], [], []
    for i in range(1, len(grid) - 1):
        d2_rows = (f_rows[i + 1] - 2.0 * f_rows[i] + f_rows[i - 1]) / spacing ** 2
        stats = _posterior_stats(model, grid[i])
        cov = stats["A"] - stats["b"][:, :, None] * stats["b"][:, None, :]
        formula_rows = -0.5 * np.sum(cov ** 2, axis=(1, 2)) / n
        value, se = model.mean(d2_rows)
        res, res_se = model.mean(d2_rows - formula_rows)
        second.append(value)
        second_se.append(se)
        formula.append(model.mean(formula_rows)[0])
        residuals.append(res)
        residual_se.append(res_se)

    concave = all(v <= sigmas * se + atol for v, se in zip(second, second_se))
    matches = all(abs(r) <= sigmas * se + atol for r, se in zip(residuals, residual_se))
    return ConcavityReport(
        grid=grid,
        second_differences=second,
        second_difference_stderrs=second_se,
        formula_values=formula,
        residuals=residuals,
        residual_stderrs=residual_se,
        concave=concave,
        passed=concave and matches,
    )


# ---------------------------------------------------------------------------
# Fluctuation identity
# ---------------------------------------------------------------------------

@dataclass
class FluctuationReport:
    lhs: float
    rhs_terms: dict[str, float]
    residual: float
    stderr: float
    thermal_lhs: float = 0.0
    thermal_residual: float = 0.0
    thermal_stderr: float = 0.0
    disorder_lhs: float = 0.0
    disorder_residual: float = 0.0
    disorder_stderr: float = 0.0
    passed: bool = False
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))


def _pair_sum(values: np.ndarray) -> np.ndarray:
    return np.sum(values, axis=(1, 2))


def fluctuation_identity_check(
    point: PathPoint,
    m: TrialParameters,
    prior: Prior,
    delta: float,
    n: int,
    method: DisorderMethod,
    sigmas: float = settings.ACCEPTANCE_SIGMAS,
    atol: float = 1e-6,
) -> FluctuationReport:
    """E⟨(ℒ − E⟨ℒ⟩)²⟩ against its closed form, and its thermal/disorder split.

    Closed form (in posterior moments, n⁻² Σ_ij):
        ¼(E⟨X_iX_j⟩² − E⟨X_i⟩²E⟨X_j⟩²) + ½(E⟨X_iX_j⟩² − E⟨X_iX_j⟩⟨X_i⟩⟨X_j⟩)
        + E[S²]/(4nε̃),
    the first two terms being the overlap variance and its two-replica form.
    """
    eps = _require_positive(point)
    model = reduced_model(point, m, prior, delta, n, method)
    stats = _posterior_stats(model)
    A, b = stats["A"], stats["b"]
    bb = b[:, :, None] * b[:, None, :]
    n2 = float(n * n)
    columns = {
        "L1": stats["L1"],
        "L2": stats["L2"],
        "L1sq": stats["L1"] ** 2,
        "A2": _pair_sum(A ** 2) / n2,
        "Abb": _pair_sum(A * bb) / n2,
        "bbbb": _pair_sum(bb ** 2) / n2,
        "b2": np.sum(b ** 2, axis=1) / n,
        "x2": np.einsum("rii->r", A) / n,
    }
    side_term = moment(prior, 2) / (4.0 * n * eps)
    weights, mc = model.batch.weights, model.batch.monte_carlo

    def lhs(v):
        return v["L2"] - v["L1"] ** 2

    def overlap_variance(v):
        return 0.25 * (v["A2"] - v["b2"] ** 2)

    def two_replica(v):
        return 0.5 * (v["A2"] - v["Abb"])

    def thermal_formula(v):
        return 0.5 * (v["A2"] - 2.0 * v["Abb"] + v["bbbb"]) + (v["x2"] - v["b2"]) / (4.0 * n * eps)

    def disorder_formula(v):
        return (0.25 * (v["A2"] - v["b2"] ** 2) + 0.5 * (v["Abb"] - v["bbbb"])
                + v["b2"] / (4.0 * n * eps))

    lhs_value, _ = delta_method(lhs, columns, weights, mc)
    terms = {
        "overlap_variance": delta_method(overlap_variance, columns, weights, mc)[0],
        "two_replica": delta_method(two_replica, columns, weights, mc)[0],
        "side_channel": side_term,
    }
    residual = lhs_value - sum(terms.values())
    _, stderr = delta_method(
        lambda v: lhs(v) - overlap_variance(v) - two_replica(v) - side_term, columns, weights, mc
    )
    thermal, _ = delta_method(lambda v: v["L2"] - v["L1sq"], columns, weights, mc)
    thermal_res, thermal_se = delta_method(
        lambda v: v["L2"] - v["L1sq"] - thermal_formula(v), columns, weights, mc
    )
    disorder, _ = delta_method(lambda v: v["L1sq"] - v["L1"] ** 2, columns, weights, mc)
    disorder_res, disorder_se = delta_method(
        lambda v: v["L1sq"] - v["L1"] ** 2 - disorder_formula(v), columns, weights, mc
    )

    passed = all(
        abs(r) <= sigmas * se + atol
        for r, se in ((residual, stderr), (thermal_res, thermal_se), (disorder_res, disorder_se))
    )
    logger.debug(f"fluctuation identity at k={point.k}, t={point.t}: residual {residual:.3e} ± {stderr:.3e}")
    return FluctuationReport(
        lhs=lhs_value,
        rhs_terms=terms,
        residual=residual,
        stderr=stderr,
        thermal_lhs=thermal,
        thermal_residual=thermal_res,
        thermal_stderr=thermal_se,
        disorder_lhs=disorder,
        disorder_residual=disorder_res,
        disorder_stderr=disorder_se,
        passed=passed,
        extras={"effective_epsilon": eps, "coupling_snr": model.coupling_snr},
    )


# ---------------------------------------------------------------------------
# Concentration diagnostics
# ---------------------------------------------------------------------------

@dataclass
class Profile:
    n_list: list[int]
    values: list[float]
    stderrs: list[float]
    slope: float
    decreasing: bool
    passed: bool


def _decreasing(values: Sequence[float], stderrs: Sequence[float], sigmas: float) -> bool:
    return all(
        values[i + 1] <= values[i] + sigmas * math.hypot(stderrs[i], stderrs[i + 1])
        for i in range(len(values) - 1)
    )


def overlap_concentration_profile(
    prior: Prior,
    delta: float,
    n_list: Sequence[int],
    K: int,
    epsilon: float,
    samples: int,
    seed: int = settings.SEED,
    m_value: float | None = None,
    threads: int | None = None,
) -> Profile:
    """E⟨(q − E⟨q⟩)²⟩ averaged over a small (k, t) grid, for each n.

    The trial sequence is constant, by default at the minimizer of the RS
    potential. The slope is reported, not asserted; acceptance is a
    decreasing trend within 2·stderr.
    """
    if m_value is None:
        m_value = minimize_potential(Matrix(delta), prior)[0]
    m = TrialParameters.constant(m_value, K)
    ks = sorted({1, (K + 1) // 2, K})
    grid = [(k, t) for k in ks for t in (0.0, 0.5)]

    values, stderrs = [], []
    for n in n_list:
        batch = path_batch(prior, delta, n, K, samples, seed, threads)
        columns = {}
        for g, (k, t) in enumerate(grid):
            mom = overlap_moments(batch, path_point(k, t, epsilon, m, delta), m, delta)
            columns[f"q2_{g}"] = mom["q2"]
            columns[f"q_{g}"] = mom["q"]

        def averaged(v):
            return float(np.mean([v[f"q2_{g}"] - v[f"q_{g}"] ** 2 for g in range(len(grid))]))

        value, se = delta_method(averaged, columns, batch.weights, batch.monte_carlo)
        values.append(value)
        stderrs.append(se)
        logger.info(f"✅ overlap fluctuation at n={n}: {value:.5f} ± {se:.5f}")

    decreasing = _decreasing(values, stderrs, 2.0)
    return Profile(
        n_list=list(n_list),
        values=values,
        stderrs=stderrs,
        slope=loglog_slope(list(n_list), values),
        decreasing=decreasing,
        passed=decreasing,
    )


def free_energy_variance_profile(
    model: ModelSpec,
    prior: Prior,
    n_list: Sequence[int],
    samples: int,
    seed: int = settings.SEED,
    threads: int | None = None,
) -> Profile:
    """Variance of the per-sample free energy across disorder, for each n.

    Accepted when the log–log slope in n is ≤ −0.5 (or every variance is 0).
    """
    values, stderrs = [], []
    for n in n_list:
        batch = build_batch(model, prior, n, MonteCarloDisorder(samples, seed, threads))
        rows = batch.free_energies([1.0 / model.delta])
        centered = rows - np.mean(rows)
        variance = float(np.var(rows, ddof=1))
        fourth = float(np.mean(centered ** 4))
        values.append(variance)
        stderrs.append(math.sqrt(max(fourth - variance ** 2, 0.0) / samples))

    slope = loglog_slope(list(n_list), values)
    degenerate = all(v == 0.0 for v in values)
    return Profile(
        n_list=list(n_list),
        values=values,
        stderrs=stderrs,
        slope=slope,
        decreasing=_decreasing(values, stderrs, 2.0),
        passed=degenerate or bool(slope <= -0.5),
    )
