"""Micro-shape functions over one lamination period and their integrals.

The period is ``[-p/2, p/2]`` with the iron sheet in ``[-d/2, d/2]`` and
insulation above and below. With ``s = 2 z / d`` inside the iron::

    phi1_0 = s            phi1 = s            phi2 = sqrt(3/2) / 2 * (s**2 - 1)

In the insulation ``phi1`` falls linearly to zero at ``z = +-p/2``,
``phi1_0`` stays at ``+-1`` and ``phi2`` vanishes. Air regions carry the
single linear profile ``2 z / p`` in place of ``phi1_0``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from ._errors import DegenerateGeometryError, InvalidArgumentError, LamstackError
from ._types import FloatArray

logger = logging.getLogger(__name__)

Part = Literal["iron", "insulation", "air"]
PARTS: tuple[Part, ...] = ("iron", "insulation", "air")

SHAPES = ("phi1_0", "phi1", "phi2")
# profiles available to the averaged forms; "d" prefixes a z-derivative
PROFILES = ("one", "phi1_0", "phi1", "phi2", "dphi1_0", "dphi1", "dphi2")

_PARITY = {
    "one": 1,
    "phi1_0": -1,
    "phi1": -1,
    "phi2": 1,
    "dphi1_0": 1,
    "dphi1": 1,
    "dphi2": -1,
}

PHI2_SCALE = 0.5 * math.sqrt(1.5)


@dataclass(frozen=True)
class LaminationSpec:
    """Iron sheet thickness ``d`` [m] and fill factor ``k_f = d / p``."""

    d: float
    k_f: float

    def __post_init__(self) -> None:
        if not self.d > 0:
            raise InvalidArgumentError(f"sheet thickness must be positive, got {self.d}")
        if not 0 < self.k_f <= 1:
            raise InvalidArgumentError(f"fill factor must be in (0, 1], got {self.k_f}")

    @classmethod
    def from_d0(cls, d: float, d0: float) -> LaminationSpec:
        if d0 < 0:
            raise InvalidArgumentError(f"insulation thickness must be >= 0, got {d0}")
        return cls(d=d, k_f=d / (d + d0))

    @property
    def p(self) -> float:
        return self.d / self.k_f

    @property
    def d0(self) -> float:
        return self.p - self.d


def _check_period(z: FloatArray, spec: LaminationSpec) -> None:
    if np.any(np.abs(z) > 0.5 * spec.p * (1 + 1e-12)):
        raise InvalidArgumentError(f"z must lie within the period |z| <= {0.5 * spec.p}")


def _shape_index(which: str) -> str:
    if which not in SHAPES:
        raise InvalidArgumentError(
            f"unknown micro-shape function {which!r}, expected one of: {', '.join(SHAPES)}"
        )
    return which


def phi(which: str, z: float | FloatArray, spec: LaminationSpec) -> FloatArray:
    """Evaluate a micro-shape function at ``z`` (scalar or array)."""
    _shape_index(which)
    z = np.asarray(z, dtype=np.float64)
    _check_period(z, spec)
    iron = np.abs(z) <= 0.5 * spec.d
    s = 2.0 * z / spec.d
    sign = np.sign(z)
    if which == "phi2":
        return np.where(iron, PHI2_SCALE * (s * s - 1.0), 0.0)
    if which == "phi1_0":
        return np.where(iron, s, sign)
    d0 = spec.d0
    if d0 == 0:
        return s
    outside = sign * (spec.p - 2.0 * np.abs(z)) / d0
    return np.where(iron, s, outside)


def dphi(
    which: str,
    z: float | FloatArray,
    spec: LaminationSpec,
    part: Literal["iron", "insulation"] | None = None,
) -> FloatArray:
    """z-derivative of a micro-shape function.

    At the kinks ``|z| = d/2`` the iron side is used unless ``part`` says
    otherwise.
    """
    _shape_index(which)
    z = np.asarray(z, dtype=np.float64)
    _check_period(z, spec)
    if part == "insulation" and spec.d0 == 0:
        raise DegenerateGeometryError("no insulation part when d0 = 0")
    if part is None:
        iron = np.abs(z) <= 0.5 * spec.d
    else:
        iron = np.full(z.shape, part == "iron")
    s = 2.0 * z / spec.d
    if which == "phi2":
        inside = PHI2_SCALE * 2.0 * s * (2.0 / spec.d)
        return np.where(iron, inside, 0.0)
    if which == "phi1_0":
        return np.where(iron, 2.0 / spec.d, 0.0)
    # phi1 is odd, so its slope in both insulation halves is -2/d0
    outside = -2.0 / spec.d0 if spec.d0 > 0 else 0.0
    return np.where(iron, 2.0 / spec.d, outside)


def _upper_profile(name: str, part: Part, spec: LaminationSpec) -> Polynomial:
    """Profile on the upper half of ``part`` as a polynomial in z."""
    d, p = spec.d, spec.p
    zero = Polynomial([0.0])
    if name == "one":
        return Polynomial([1.0])
    derivative = name.startswith("d")
    base = name[1:] if derivative else name
    if part == "air":
        poly = Polynomial([0.0, 2.0 / p]) if base == "phi1_0" else zero
    elif part == "iron":
        if base == "phi2":
            poly = PHI2_SCALE * Polynomial([-1.0, 0.0, 4.0 / d**2])
        else:
            poly = Polynomial([0.0, 2.0 / d])
    elif spec.d0 == 0 or base == "phi2":
        poly = zero
    elif base == "phi1_0":
        poly = Polynomial([1.0])
    else:
        poly = Polynomial([p / spec.d0, -2.0 / spec.d0])
    return poly.deriv() if derivative else poly


def _upper_interval(part: Part, spec: LaminationSpec) -> tuple[float, float]:
    if part == "iron":
        return 0.0, 0.5 * spec.d
    if part == "insulation":
        return 0.5 * spec.d, 0.5 * spec.p
    return 0.0, 0.5 * spec.p


def profile_value(name: str, part: Part, spec: LaminationSpec, z: float) -> float:
    """Pointwise profile used by the quadrature cross-check."""
    if name == "one":
        return 1.0
    base = name[1:] if name.startswith("d") else name
    if part == "air":
        if base != "phi1_0":
            return 0.0
        return 2.0 / spec.p if name.startswith("d") else 2.0 * z / spec.p
    section: Literal["iron", "insulation"] = "iron" if part == "iron" else "insulation"
    if name.startswith("d"):
        return float(dphi(base, z, spec, part=section))
    return float(phi(base, z, spec))


@dataclass(frozen=True, eq=False)
class MicroShapeTable:
    """Period integrals ``int f g dz`` per part (``iron``, ``insulation``, ``air``).

    Keys are ``(part, f, g)`` with ``f <= g`` in :data:`PROFILES` order; the
    single integrals ``int f dz`` are the pairs with ``"one"``.
    """

    spec: LaminationSpec
    entries: Mapping[tuple[str, str, str], float]

    def integral(self, part: Part, f: str, g: str = "one") -> float:
        if f not in PROFILES or g not in PROFILES:
            raise InvalidArgumentError(f"unknown profile pair ({f!r}, {g!r})")
        if PROFILES.index(f) > PROFILES.index(g):
            f, g = g, f
        return self.entries[(part, f, g)]

    def __iter__(self) -> Iterator[tuple[tuple[str, str, str], float]]:
        return iter(self.entries.items())

    @cached_property
    def as_dict(self) -> dict[str, float]:
        return {f"{part}:{f}*{g}": value for (part, f, g), value in self.entries.items()}


def integral_table(spec: LaminationSpec, *, verify: bool = True) -> MicroShapeTable:
    """Closed-form table of all profile products over each part.

    The upper half of each part is integrated exactly; the lower half
    follows from the parity of the profiles, so odd products vanish
    exactly. With ``verify`` every entry is compared against adaptive
    quadrature over the full part.
    """
    entries: dict[tuple[str, str, str], float] = {}
    for part in PARTS:
        lo, hi = _upper_interval(part, spec)
        for i, f in enumerate(PROFILES):
            for g in PROFILES[i:]:
                sym = _PARITY[f] * _PARITY[g]
                if sym < 0 or hi <= lo:
                    entries[(part, f, g)] = 0.0
                    continue
                antiderivative = (_upper_profile(f, part, spec) * _upper_profile(g, part, spec)).integ()
                entries[(part, f, g)] = 2.0 * float(antiderivative(hi) - antiderivative(lo))
    table = MicroShapeTable(spec=spec, entries=entries)
    if verify:
        _verify(table)
    logger.debug("micro-shape table for d=%g, k_f=%g: %d entries", spec.d, spec.k_f, len(entries))
    return table


def _product(f: str, g: str, part: Part, spec: LaminationSpec) -> Callable[[float], float]:
    def integrand(z: float) -> float:
        return profile_value(f, part, spec, z) * profile_value(g, part, spec, z)

    return integrand


def _verify(table: MicroShapeTable, rtol: float = 1e-12) -> None:
    spec = table.spec
    for (part, f, g), value in table:
        lo, hi = _upper_interval(part, spec)
        if hi <= lo:
            continue
        # Cauchy-Schwarz bound as the scale of parity zeros
        scale = max(abs(value), math.sqrt(table.integral(part, f, f) * table.integral(part, g, g)))
        if scale == 0:
            continue
        integrand = _product(f, g, part, spec)
        oracle = 0.0
        for a, b in ((lo, hi), (-hi, -lo)):
            result, _err = quad(integrand, a, b, epsabs=1e-15 * scale, epsrel=1e-14)
            oracle += result
        if abs(value - oracle) > rtol * scale:
            raise LamstackError(
                f"micro-shape integral {part}:{f}*{g} = {value!r} disagrees with quadrature {oracle!r}"
            )
