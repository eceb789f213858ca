"""Fixed-order quadrature rules.

Gauss–Hermite rules are normalized against the standard normal density so that
``E[f(Z)] ≈ sum(w * f(z))`` with ``sum(w) == 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import roots_legendre


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a one-dimensional rule."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return int(self.nodes.shape[0])


@lru_cache(maxsize=64)
def gauss_hermite_normal(order: int) -> QuadratureRule:
    """Probabilists' Gauss–Hermite rule for ``Z ~ N(0, 1)``.

    Args:
        order: Number of nodes, at least 2.

    Returns:
        Rule with weights summing to one.

    Raises:
        ValueError: If ``order < 2``.
    """
    if order < 2:
        raise ValueError(f"Gauss–Hermite order must be >= 2, got {order}")
    z, w = hermegauss(order)
    w = w / math.sqrt(2.0 * math.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(nodes=z, weights=w)


@lru_cache(maxsize=64)
def gauss_legendre_unit(order: int) -> QuadratureRule:
    """Gauss–Legendre rule on ``[0, 1]``."""
    if order < 1:
        raise ValueError(f"Gauss–Legendre order must be >= 1, got {order}")
    x, w = roots_legendre(order)
    t = 0.5 * (np.asarray(x) + 1.0)
    w = 0.5 * np.asarray(w)
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(nodes=t, weights=w)


def integrate_unit(fn, order: int) -> float:
    """Integrate a scalar function of ``t`` over ``[0, 1]``."""
    rule = gauss_legendre_unit(order)
    return float(sum(w * fn(float(t)) for t, w in zip(rule.nodes, rule.weights)))


def product_gauss_hermite(dims: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss–Hermite rule over ``dims`` standard normals.

    Returns:
        ``(nodes, weights)`` with shapes ``(order**dims, dims)`` and ``(order**dims,)``.
    """
    if dims == 0:
        return np.zeros((1, 0)), np.ones(1)
    rule = gauss_hermite_normal(order)
    grids = np.meshgrid(*([rule.nodes] * dims), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([rule.weights] * dims), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights
