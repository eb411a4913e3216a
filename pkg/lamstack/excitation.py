"""Analytic source fields of straight round conductors along z."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ._errors import InvalidArgumentError
from ._types import ComplexArray, FloatArray


@dataclass(frozen=True)
class ConductorSpec:
    """Infinitely long round conductor carrying the peak phasor ``current`` [A]."""

    center: tuple[float, float]
    radius: float
    current: complex

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise InvalidArgumentError(f"conductor radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def density(self) -> complex:
        return complex(self.current) / self.area


def check_conductors(conductors: Sequence[ConductorSpec]) -> None:
    for a in range(len(conductors)):
        for b in range(a + 1, len(conductors)):
            ca, cb = conductors[a], conductors[b]
            if math.dist(ca.center, cb.center) < ca.radius + cb.radius:
                raise InvalidArgumentError(f"conductors {a} and {b} overlap")


def _as_points(points: FloatArray | Sequence[float]) -> FloatArray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != 2:
        raise InvalidArgumentError("points need two coordinates")
    return pts


def biot_savart_H(
    conductors: Sequence[ConductorSpec], points: FloatArray | Sequence[float]
) -> ComplexArray:
    """In-plane field ``(..., 2)`` [A/m] of all conductors at ``points``.

    Inside a conductor the field grows linearly, ``I r / (2 pi R**2)``;
    outside it is ``I / (2 pi r)``; positive current circulates counter-clockwise.
    """
    pts = _as_points(points)
    field = np.zeros(pts.shape, dtype=np.complex128)
    for spec in conductors:
        dx = pts[..., 0] - spec.center[0]
        dy = pts[..., 1] - spec.center[1]
        r2 = dx * dx + dy * dy
        inside = r2 < spec.radius**2
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(inside, 1.0 / spec.radius**2, 1.0 / np.where(r2 > 0, r2, 1.0))
        factor = complex(spec.current) / (2.0 * math.pi) * scale
        field[..., 0] += -factor * dy
        field[..., 1] += factor * dx
    return field


def j0_density(
    conductors: Sequence[ConductorSpec], points: FloatArray | Sequence[float]
) -> ComplexArray:
    """Impressed current density ``J0_z`` [A/m^2] at ``points``."""
    pts = _as_points(points)
    density = np.zeros(pts.shape[:-1], dtype=np.complex128)
    for spec in conductors:
        r2 = (pts[..., 0] - spec.center[0]) ** 2 + (pts[..., 1] - spec.center[1]) ** 2
        density += np.where(r2 < spec.radius**2, spec.density, 0.0)
    return density


def circulation(
    conductors: Sequence[ConductorSpec], loop: FloatArray | Sequence[Sequence[float]]
) -> complex:
    """Line integral of the source field along a closed polyline.

    The first and last point must coincide.
    """
    pts = _as_points(loop)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise InvalidArgumentError("a closed loop needs at least three distinct points")
    if not np.allclose(pts[0], pts[-1], rtol=0, atol=1e-15 * max(1.0, float(np.abs(pts).max()))):
        raise InvalidArgumentError("loop is open: first and last point differ")

    total = 0j
    tol = 1e-10 * max((abs(complex(c.current)) for c in conductors), default=1.0)
    for start, end in zip(pts[:-1], pts[1:], strict=True):
        step = end - start

        def tangential(t: float, part: int, start: FloatArray = start, step: FloatArray = step) -> float:
            h = biot_savart_H(conductors, start + t * step)
            value = complex(h[0] * step[0] + h[1] * step[1])
            return value.imag if part else value.real

        re, _ = quad(tangential, 0.0, 1.0, args=(0,), epsabs=tol, epsrel=1e-10, limit=200)
        im, _ = quad(tangential, 0.0, 1.0, args=(1,), epsabs=tol, epsrel=1e-10, limit=200)
        total += complex(re, im)
    return total
