"""Estimators for disorder averages.

Every estimator takes per-row values and per-row weights. Monte Carlo rows
carry weight 1/S, quadrature rows carry their product weights; the standard
error of a quadrature estimate is zero.
"""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


def weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.dot(weights, values))


def mean_stderr(values: np.ndarray, weights: np.ndarray | None = None, monte_carlo: bool = True) -> tuple[float, float]:
    """Mean and standard error of per-row values.

    Args:
        values: Shape ``(rows,)``.
        weights: Row weights summing to one; uniform when omitted.
        monte_carlo: When False the rows are quadrature nodes and stderr is 0.

    Returns:
        ``(mean, stderr)``; stderr is the sample standard deviation over √rows.
    """
    values = np.asarray(values, dtype=float)
    rows = values.shape[0]
    if weights is None:
        weights = np.full(rows, 1.0 / rows)
    mean = weighted_mean(values, weights)
    if not monte_carlo or rows < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(rows))


def delta_method(
    fn: Callable[[Mapping[str, float]], float],
    columns: Mapping[str, np.ndarray],
    weights: np.ndarray,
    monte_carlo: bool = True,
    step: float = 1e-6,
) -> tuple[float, float]:
    """Value and standard error of a smooth function of several means.

    The gradient of ``fn`` at the sample means is taken by central differences;
    the stderr is that of the linearized per-row combination.
    """
    means = {name: weighted_mean(col, weights) for name, col in columns.items()}
    value = float(fn(means))
    if not monte_carlo:
        return value, 0.0

    rows = next(iter(columns.values())).shape[0]
    linear = np.zeros(rows)
    for name, col in columns.items():
        h = step * max(1.0, abs(means[name]))
        up = dict(means, **{name: means[name] + h})
        down = dict(means, **{name: means[name] - h})
        grad = (fn(up) - fn(down)) / (2.0 * h)
        linear += grad * col
    return value, float(np.std(linear, ddof=1) / np.sqrt(rows))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``.

    Non-positive ``y`` values are dropped; fewer than two points gives NaN.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = ys > 0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(slope)
