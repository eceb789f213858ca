"""One-dimensional minimization helpers."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

# Values this close count as ties; quadrature noise near a flat minimum is ~1e-16.
TIE_TOL = 1e-14


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-8) -> tuple[float, float]:
    """Golden-section search for the minimum of a unimodal ``f`` on ``[a, b]``.

    Returns:
        ``(x_min, f(x_min))``; the endpoints are included as candidates so a
        minimum sitting on the boundary is returned exactly.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    candidates = [(f(a), a), (f(b), b)]
    if h > tol:
        steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
        c = a + INV_PHI_SQUARE * h
        d = a + INV_PHI * h
        yc = f(c)
        yd = f(d)
        for _ in range(max(steps - 1, 0)):
            if yc <= yd:
                b, d, yd = d, c, yc
                h *= INV_PHI
                c = a + INV_PHI_SQUARE * h
                yc = f(c)
            else:
                a, c, yc = c, d, yd
                h *= INV_PHI
                d = a + INV_PHI * h
                yd = f(d)
        candidates += [(yc, c), (yd, d)]
    # ties resolve toward the smaller argument
    lowest = min(value for value, _ in candidates)
    best = min((pair for pair in candidates if pair[0] <= lowest + TIE_TOL), key=lambda pair: pair[1])
    return best[1], best[0]


def grid_then_golden(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    grid: int,
    tol: float,
) -> tuple[float, float]:
    """Dense scan of ``[lower, upper]`` followed by golden-section refinement.

    The refinement bracket is the pair of grid cells around the best grid
    point; ties (within ``TIE_TOL``) go to the smallest argument.
    """
    if upper <= lower:
        return lower, f(lower)
    xs = np.linspace(lower, upper, grid + 1)
    ys = np.array([f(float(x)) for x in xs])
    i = int(np.argmin(ys))  # first occurrence
    lo = float(xs[max(i - 1, 0)])
    hi = float(xs[min(i + 1, grid)])
    x_ref, y_ref = golden_section(f, lo, hi, tol)
    if ys[i] <= y_ref + TIE_TOL:
        return float(xs[i]), float(ys[i])
    return x_ref, y_ref
