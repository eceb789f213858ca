"""Replica-symmetric potentials for matrix, tensor and random linear estimation.

Matrix and tensor potentials are functions of the overlap ``m``; the RLE
potential is a function of the error level ``E``. The matrix model is the
order-2 tensor model and is evaluated by the same code path.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from config import settings
from replica_lab.prior import Prior, moment
from replica_lab.scalar_channel import f_den_snr, fden_snr_derivative, i_den_snr, iden_snr_derivative
from services.executor_service import map_ordered
from utils.optimize import golden_section, grid_then_golden

logger = logging.getLogger("replica_lab.rs_potential")


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Matrix:
    """w_ij = s_i s_j/√n + z_ij √Δ."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class Tensor:
    """Symmetric order-p spiked tensor."""

    p: int
    delta: float

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"tensor order must be >= 2, got {self.p}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class Rle:
    """y = Φ s + z √Δ with Φ of shape (αn, n), entries N(0, 1/n)."""

    alpha: float
    delta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


ModelSpec = Union[Matrix, Tensor, Rle]


def tensor_order(model: ModelSpec) -> int:
    """Interaction order: 2 for the matrix model."""
    if isinstance(model, Tensor):
        return model.p
    if isinstance(model, Matrix):
        return 2
    raise TypeError(f"{type(model).__name__} has no tensor order")


def with_delta(model: ModelSpec, delta: float) -> ModelSpec:
    if isinstance(model, Matrix):
        return Matrix(delta)
    if isinstance(model, Tensor):
        return Tensor(model.p, delta)
    return Rle(model.alpha, delta)


def model_from_config(name: str, delta: float, p: int = 3, alpha: float = 1.0) -> ModelSpec:
    name = name.strip().lower()
    if name == "matrix":
        return Matrix(delta)
    if name == "tensor":
        return Tensor(p, delta)
    if name == "rle":
        return Rle(alpha, delta)
    raise ValueError(f"unknown model {name!r}; expected matrix, tensor or rle")


def model_label(model: ModelSpec) -> dict:
    if isinstance(model, Matrix):
        return {"model": "matrix", "delta": model.delta}
    if isinstance(model, Tensor):
        return {"model": "tensor", "p": model.p, "delta": model.delta}
    return {"model": "rle", "alpha": model.alpha, "delta": model.delta}


@dataclass(frozen=True)
class RsCurvePoint:
    delta: float
    m_star: float
    f_rs: float
    mutual_info_per_component: float


@dataclass
class TransitionReport:
    """Location of a non-analyticity of the RS free energy in Δ."""

    delta_c: float | None
    kind: str                      # "first-order", "continuous" or "none"
    bracket: tuple[float, float] | None
    competing_minima: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "delta_c": self.delta_c,
            "kind": self.kind,
            "bracket": list(self.bracket) if self.bracket else None,
            "competing_minima": [list(pair) for pair in self.competing_minima],
        }


# ---------------------------------------------------------------------------
# Effective noise
# ---------------------------------------------------------------------------

def snr_of_m(model: ModelSpec, m: float) -> float:
    """Σ(m)⁻²: m^{p−1}/Δ for matrix/tensor, α/(Δ+E) for RLE."""
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    if isinstance(model, Rle):
        return model.alpha / (model.delta + m)
    p = tensor_order(model)
    return m ** (p - 1) / model.delta


def sigma_of_m(model: ModelSpec, m: float) -> float:
    """Σ(m); ``math.inf`` at zero SNR."""
    snr = snr_of_m(model, m)
    return math.inf if snr == 0.0 else 1.0 / math.sqrt(snr)


def psi(alpha: float, delta: float, E: float) -> float:
    """(α/2)(ln(1 + E/Δ) − E/(Δ + E))."""
    if E < 0:
        raise ValueError(f"E must be nonnegative, got {E}")
    return 0.5 * alpha * (math.log1p(E / delta) - E / (delta + E))


def psi_tilde(alpha: float, delta: float, snr: float) -> float:
    """ψ as a function of Σ⁻² = α/(Δ+E), defined on (0, α/Δ]."""
    if not 0 < snr <= alpha / delta * (1 + 1e-12):
        raise ValueError(f"snr must lie in (0, alpha/delta], got {snr}")
    return psi(alpha, delta, max(alpha / snr - delta, 0.0))


def psi_tilde_is_convex(alpha: float, delta: float, a: float, b: float, atol: float = 1e-12) -> bool:
    """Midpoint convexity of :func:`psi_tilde` between SNRs ``a`` and ``b``."""
    mid = psi_tilde(alpha, delta, 0.5 * (a + b))
    return mid <= 0.5 * (psi_tilde(alpha, delta, a) + psi_tilde(alpha, delta, b)) + atol


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@lru_cache(maxsize=65536)
def _potential(model: ModelSpec, prior: Prior, m: float, quad_order: int) -> float:
    snr = snr_of_m(model, m)
    if isinstance(model, Rle):
        return psi(model.alpha, model.delta, m) + i_den_snr(prior, snr, quad_order)
    p = tensor_order(model)
    return (p - 1) * m ** p / (2 * p * model.delta) + f_den_snr(prior, snr, quad_order)


def rs_potential(model: ModelSpec, prior: Prior, m: float, quad_order: int = settings.QUAD_ORDER) -> float:
    """RS potential at overlap ``m`` (error level ``E`` for RLE).

    Matrix: m²/(4Δ) + f_den(Σ(m)); Tensor: (p−1)m^p/(2pΔ) + f_den(Σ(m));
    RLE: ψ(E) + i_den(Σ(E)).
    """
    return _potential(model, prior, float(m), quad_order)


def search_upper(prior: Prior) -> float:
    """Overlaps and MMSEs both live in [0, E[S²]]."""
    return moment(prior, 2)


def minimize_potential(
    model: ModelSpec,
    prior: Prior,
    quad_order: int = settings.QUAD_ORDER,
    grid: int = settings.GRID,
    tol: float = settings.GOLDEN_TOL,
    upper: float | None = None,
) -> tuple[float, float]:
    """Global minimizer of the RS potential on ``[0, upper]``.

    Dense grid scan then golden-section refinement; ties go to the smallest m.

    Returns:
        ``(m_star, f_rs)`` with ``f_rs == rs_potential(m_star)``.
    """
    if grid < 64:
        raise ValueError(f"grid must be >= 64, got {grid}")
    upper = search_upper(prior) if upper is None else upper
    return grid_then_golden(lambda m: rs_potential(model, prior, m, quad_order), 0.0, upper, grid, tol)


def local_minima(
    model: ModelSpec,
    prior: Prior,
    quad_order: int = settings.QUAD_ORDER,
    grid: int = settings.GRID,
    tol: float = settings.GOLDEN_TOL,
) -> list[tuple[float, float]]:
    """All local minima visible on the grid, each refined by golden section."""
    upper = search_upper(prior)
    if upper == 0.0:
        return [(0.0, rs_potential(model, prior, 0.0, quad_order))]
    xs = np.linspace(0.0, upper, grid + 1)
    ys = np.array([rs_potential(model, prior, float(x), quad_order) for x in xs])
    found = []
    for i in range(grid + 1):
        left = ys[i - 1] if i > 0 else math.inf
        right = ys[i + 1] if i < grid else math.inf
        if ys[i] <= left and ys[i] < right:
            lo, hi = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, grid)])
            found.append(golden_section(lambda m: rs_potential(model, prior, m, quad_order), lo, hi, tol))
    return found


def stationarity_map(model: ModelSpec, prior: Prior, m: float, quad_order: int = settings.QUAD_ORDER) -> float:
    """One step of the RS fixed-point map.

    Matrix/tensor: m ← −2 ∂f_den/∂Σ⁻² at Σ(m)⁻² = m^{p−1}/Δ.
    RLE: E ← 2 ∂i_den/∂Σ⁻² at Σ(E)⁻² = α/(Δ+E), i.e. the scalar MMSE.
    """
    snr = snr_of_m(model, m)
    if isinstance(model, Rle):
        value = 2.0 * iden_snr_derivative(prior, snr, quad_order)
    else:
        value = -2.0 * fden_snr_derivative(prior, snr, quad_order)
    return min(max(value, 0.0), search_upper(prior))


def fixed_point(
    model: ModelSpec,
    prior: Prior,
    m0: float,
    quad_order: int = settings.QUAD_ORDER,
    max_iter: int = 500,
    tol: float = 1e-10,
) -> tuple[float, int, bool]:
    """Iterate :func:`stationarity_map` from ``m0``.

    Returns:
        ``(m_fix, iterations, converged)``; on non-convergence the last iterate.
    """
    m = float(m0)
    for it in range(1, max_iter + 1):
        m_next = stationarity_map(model, prior, m, quad_order)
        if abs(m_next - m) < tol:
            return m_next, it, True
        m = m_next
    logger.warning(f"⚠️ fixed point did not converge in {max_iter} iterations (last m={m:.6g})")
    return m, max_iter, False


def stationarity_residual(model: ModelSpec, prior: Prior, m: float, quad_order: int = settings.QUAD_ORDER) -> float:
    """``m`` minus the fixed-point map at ``m``; zero at a stationary point."""
    return m - stationarity_map(model, prior, m, quad_order)


def mutual_information(model: ModelSpec, prior: Prior, f_value: float) -> float:
    """Convert a free energy per component to a mutual information per component."""
    if isinstance(model, Rle):
        return f_value
    p = tensor_order(model)
    return f_value + moment(prior, 2) ** p / (2 * p * model.delta)


# ---------------------------------------------------------------------------
# Δ-sweeps and transitions
# ---------------------------------------------------------------------------

def rs_curve_point(model: ModelSpec, prior: Prior, quad_order: int, grid: int, tol: float) -> RsCurvePoint:
    m_star, f_rs = minimize_potential(model, prior, quad_order, grid, tol)
    return RsCurvePoint(
        delta=model.delta,
        m_star=m_star,
        f_rs=f_rs,
        mutual_info_per_component=mutual_information(model, prior, f_rs),
    )


def rs_curve(
    model: ModelSpec,
    prior: Prior,
    deltas: Sequence[float],
    quad_order: int = settings.QUAD_ORDER,
    grid: int = settings.GRID,
    tol: float = settings.GOLDEN_TOL,
    threads: int | None = None,
) -> list[RsCurvePoint]:
    """Minimize the potential at every Δ; parallel over Δ."""
    return map_ordered(
        lambda d: rs_curve_point(with_delta(model, d), prior, quad_order, grid, tol),
        list(deltas),
        threads,
    )


def _bisect(a: float, b: float, on_left_side: Callable[[float], bool], tol: float) -> tuple[float, float]:
    while b - a > tol:
        mid = 0.5 * (a + b)
        if on_left_side(mid):
            a = mid
        else:
            b = mid
    return a, b


def scan_and_locate_transition(
    model: ModelSpec,
    prior: Prior,
    delta_range: tuple[float, float],
    steps: int,
    refine_tol: float = 1e-4,
    quad_order: int = settings.QUAD_ORDER,
    grid: int = settings.GRID,
    tol: float = settings.GOLDEN_TOL,
    threads: int | None = None,
) -> tuple[list[RsCurvePoint], TransitionReport]:
    """Sweep Δ, then locate the first transition found along the sweep.

    First-order: two local minima coexist and the sign of
    f(high branch) − f(low branch) flips between adjacent Δ values, i.e. the
    global minimizer changes branch, moving m_star by more than
    ``JUMP_FRACTION·E[S²]``. A steep but single-branch m_star is not a jump.
    The crossing is bisected in Δ and the competing minima are reported there.

    Continuous: m_star crosses ``SMALLNESS_FRACTION·E[S²]`` between adjacent
    Δ values with a single minimum at both; the crossing is bisected.
    """
    lo_d, hi_d = delta_range
    if not 0 < lo_d < hi_d:
        raise ValueError(f"delta_range must be positive and increasing, got {delta_range}")
    if steps < 8:
        raise ValueError(f"steps must be >= 8, got {steps}")

    deltas = [float(d) for d in np.linspace(lo_d, hi_d, steps)]
    points = rs_curve(model, prior, deltas, quad_order, grid, tol, threads)
    minima = map_ordered(
        lambda d: local_minima(with_delta(model, d), prior, quad_order, grid, tol),
        deltas,
        threads,
    )
    scale = search_upper(prior)
    jump = settings.JUMP_FRACTION * scale
    small = settings.SMALLNESS_FRACTION * scale

    def m_at(delta: float) -> float:
        return minimize_potential(with_delta(model, delta), prior, quad_order, grid, tol)[0]

    for i in range(steps - 1):
        left, right = points[i], points[i + 1]
        coexisting = minima[i] if len(minima[i]) >= 2 else minima[i + 1]
        if len(coexisting) >= 2:
            low_m = min(m for m, _ in coexisting)
            high_m = max(m for m, _ in coexisting)
            split = 0.5 * (low_m + high_m)
            left_high = left.m_star > split
            if left_high != (right.m_star > split) and abs(right.m_star - left.m_star) > jump:
                a, b = _bisect(left.delta, right.delta, lambda d: (m_at(d) > split) == left_high, refine_tol)
                delta_c = 0.5 * (a + b)
                competing = local_minima(with_delta(model, delta_c), prior, quad_order, grid, tol)
                logger.info(f"✅ first-order transition at Δ={delta_c:.6f} (bracket [{a:.6f}, {b:.6f}])")
                return points, TransitionReport(
                    delta_c=delta_c, kind="first-order", bracket=(a, b), competing_minima=competing
                )
            continue

        if len(minima[i]) == 1 and len(minima[i + 1]) == 1 and (left.m_star > small) != (right.m_star > small):
            left_high = left.m_star > small
            a, b = _bisect(left.delta, right.delta, lambda d: (m_at(d) > small) == left_high, refine_tol)
            delta_c = 0.5 * (a + b)
            logger.info(f"✅ continuous transition at Δ={delta_c:.6f} (bracket [{a:.6f}, {b:.6f}])")
            return points, TransitionReport(delta_c=delta_c, kind="continuous", bracket=(a, b))

    return points, TransitionReport(delta_c=None, kind="none", bracket=None)


# ---------------------------------------------------------------------------
# Trial-sequence quantities
# ---------------------------------------------------------------------------

def v_k_variance(m_list: Sequence[float]) -> float:
    """mean(m²) − mean(m)²."""
    m = _check_list(m_list)
    return float(np.mean(m ** 2) - np.mean(m) ** 2)


def v_kp_variance(m_list: Sequence[float], p: int) -> float:
    """mean(m^p) − mean(m^{p−1})^{p/(p−1)}; nonnegative by Jensen."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    m = _check_list(m_list)
    return float(np.mean(m ** p) - np.mean(m ** (p - 1)) ** (p / (p - 1)))


def _check_list(m_list: Sequence[float]) -> np.ndarray:
    m = np.asarray(m_list, dtype=float)
    if m.size == 0:
        raise ValueError("trial list must be nonempty")
    if np.any(m < 0):
        raise ValueError(f"trial entries must be nonnegative, got {m_list}")
    return m


def f_tilde_rs(model: ModelSpec, prior: Prior, m_list: Sequence[float], quad_order: int = settings.QUAD_ORDER) -> float:
    """Potential of a whole trial sequence.

    Matrix: (1/4ΔK)Σm_k² + f_den at Σ⁻² = mean(m)/Δ.
    Tensor: ((p−1)/2pΔK)Σm_k^p + f_den at Σ⁻² = mean(m^{p−1})/Δ.
    RLE: i_den at Σ⁻² = mean_k α/(Δ+E_k), plus mean_k ψ(E_k).
    """
    m = _check_list(m_list)
    if isinstance(model, Rle):
        snr = float(np.mean(model.alpha / (model.delta + m)))
        return i_den_snr(prior, snr, quad_order) + float(np.mean([psi(model.alpha, model.delta, e) for e in m]))
    p = tensor_order(model)
    snr = float(np.mean(m ** (p - 1))) / model.delta
    return (p - 1) * float(np.sum(m ** p)) / (2 * p * model.delta * m.size) + f_den_snr(prior, snr, quad_order)


def minimize_f_tilde(
    model: ModelSpec,
    prior: Prior,
    K: int,
    grid: int = 32,
    quad_order: int = settings.QUAD_ORDER,
) -> tuple[np.ndarray, float]:
    """Minimize f̃_RS over ``[0, E[S²]]^K``: nested grid, then bounded L-BFGS-B polish."""
    upper = search_upper(prior)
    axis = np.linspace(0.0, upper, grid)
    best_value = math.inf
    best = np.zeros(K)
    for idx in np.ndindex(*([grid] * K)):
        point = axis[list(idx)]
        value = f_tilde_rs(model, prior, point, quad_order)
        if value < best_value:
            best_value, best = value, point.copy()

    result = minimize(
        lambda v: f_tilde_rs(model, prior, np.clip(v, 0.0, upper), quad_order),
        best,
        method="L-BFGS-B",
        bounds=[(0.0, upper)] * K,
        options={"ftol": 1e-14, "gtol": 1e-10},
    )
    if result.fun < best_value:
        best, best_value = np.clip(result.x, 0.0, upper), float(result.fun)
    return best, float(best_value)
