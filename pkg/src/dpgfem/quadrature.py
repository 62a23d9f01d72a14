"""Gauss-Legendre rules on [-1,1], its tensor square, and physical facets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def gauss_1d(n: int) -> QuadRule:
    """n-point Gauss-Legendre rule on [-1, 1], exact for degree 2n-1."""
    if not 1 <= n <= 30:
        raise ValueError(f"gauss_1d: order {n} outside supported range [1, 30]")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(x, w)


def tensor_quad(n: int) -> QuadRule:
    """Tensor-product rule on [-1, 1]^2 with n points per direction."""
    line = gauss_1d(n)
    X, Y = np.meshgrid(line.points, line.points)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    w = np.outer(line.weights, line.weights).ravel()
    return QuadRule(pts, w)


def facet_quad(n: int, endpoints: np.ndarray) -> QuadRule:
    """Rule on the segment between two physical points; weights sum to its length."""
    p0 = np.asarray(endpoints[0], dtype=float)
    p1 = np.asarray(endpoints[1], dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0.0:
        raise ValueError("facet_quad: degenerate facet with coincident endpoints")
    line = gauss_1d(n)
    t = 0.5 * (line.points + 1.0)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    return QuadRule(pts, 0.5 * length * line.weights)
