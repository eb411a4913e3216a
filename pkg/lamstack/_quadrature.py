"""Quadrature rules on the reference triangle and the unit interval."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from ._errors import InvalidArgumentError
from ._types import FloatArray

MAX_DEGREE = 10


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points on the reference triangle ``(0,0), (1,0), (0,1)``.

    ``barycentric`` holds ``(lambda0, lambda1, lambda2)`` per point with
    ``lambda1 = x`` and ``lambda2 = y``; weights sum to the reference area 1/2.
    """

    barycentric: FloatArray
    weights: FloatArray
    degree: int

    @property
    def points(self) -> FloatArray:
        return self.barycentric[:, 1:]

    @property
    def num_points(self) -> int:
        return int(self.weights.shape[0])


@lru_cache(maxsize=None)
def quadrature(degree: int) -> QuadratureRule:
    """Return a rule exact for polynomials of total degree ``degree``.

    Degree 1 is the centroid rule. Higher degrees use a collapsed
    Gauss-Legendre product rule with ``ceil((degree + 2) / 2)`` points per
    direction, which integrates the extra factor of the collapse exactly.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise InvalidArgumentError(
            f"quadrature degree must be in 1..{MAX_DEGREE}, got {degree}"
        )
    if degree == 1:
        bary = np.full((1, 3), 1.0 / 3.0)
        weights = np.array([0.5])
    else:
        m = math.ceil((degree + 2) / 2)
        nodes, w = leggauss(m)
        t = 0.5 * (nodes + 1.0)
        wt = 0.5 * w
        # x = u, y = v (1 - u) with jacobian (1 - u)
        u, v = np.meshgrid(t, t, indexing="ij")
        wu, wv = np.meshgrid(wt, wt, indexing="ij")
        x = u.ravel()
        y = (v * (1.0 - u)).ravel()
        weights = (wu * wv * (1.0 - u)).ravel()
        bary = np.column_stack([1.0 - x - y, x, y])
    bary.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(barycentric=bary, weights=weights, degree=degree)


@lru_cache(maxsize=None)
def line_quadrature(num_points: int) -> tuple[FloatArray, FloatArray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    nodes, weights = leggauss(num_points)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def default_degree(max_poly_degree: int) -> int:
    return min(MAX_DEGREE, 2 * max_poly_degree + 1)
