"""Type definitions shared across the lamstack package."""

from __future__ import annotations

from enum import Enum
from typing import Literal, NewType, TypeAlias

import numpy as np
from numpy.typing import NDArray

# Region ids label triangles; they index the RegionSpec table of a problem
RegionId = NewType("RegionId", int)

# Named DOF block of an assembled system, e.g. "T0" or "u10"
BlockName = NewType("BlockName", str)

FloatArray: TypeAlias = NDArray[np.float64]
ComplexArray: TypeAlias = NDArray[np.complex128]
IntArray: TypeAlias = NDArray[np.int64]

RegionKind = Literal["laminated", "air", "conductor"]

MU0 = 4e-7 * np.pi


class BoundaryTag(str, Enum):
    """Boundary condition class of a boundary edge.

    The members house the boundary parts of the eddy current problem:
    ``gamma_h`` (tangential H), ``gamma_j`` (normal current),
    ``gamma_b`` (normal flux) and ``gamma_e`` (tangential E, the symmetry
    plane through iron).
    """

    GAMMA_H = "gamma_h"
    GAMMA_J = "gamma_j"
    GAMMA_B = "gamma_b"
    GAMMA_E = "gamma_e"

    @classmethod
    def parse(cls, value: BoundaryTag | str) -> BoundaryTag:
        try:
            return cls(value)
        except ValueError:
            valid = ", ".join(tag.value for tag in cls)
            raise ValueError(
                f"unknown boundary tag {value!r}, expected one of: {valid}"
            ) from None


class MethodId(str, Enum):
    """The four 2D/1D multiscale formulations."""

    TMS1 = "TMS1"
    TMS2 = "TMS2"
    AMS1 = "AMS1"
    AMS2 = "AMS2"

    @property
    def is_t_family(self) -> bool:
        return self in (MethodId.TMS1, MethodId.TMS2)

    @classmethod
    def parse(cls, value: MethodId | str) -> MethodId:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            valid = ", ".join(method.value for method in cls)
            raise ValueError(
                f"unknown method {value!r}, expected one of: {valid}"
            ) from None


class ExcitationMode(str, Enum):
    BIOT_SAVART = "biot_savart"
    IMPRESSED_J0 = "impressed_j0"
    BOUNDARY_ONLY = "boundary_only"
