from __future__ import annotations

import importlib.metadata

from ._errors import (
    ConfigError,
    ConvergenceError,
    InvalidArgumentError,
    InvalidProblemError,
    LamstackError,
    MeshError,
    SingularMatrixError,
    SolverError,
)
from ._types import BoundaryTag, ExcitationMode, MethodId
from .excitation import ConductorSpec, biot_savart_H
from .formulations import (
    DiscretizationConfig,
    LossReport,
    MultiscaleProblem,
    SolutionField,
    losses,
    reconstruct,
    run,
    segment_problem,
    strip_problem,
)
from .mesh2d import Mesh2D, RegionSpec, SegmentGeometry, make_rect_mesh, make_segment_mesh, read_msh
from .microshape import LaminationSpec, integral_table
from .oracles import cross_section_fem, lamination_1d, strip_reference

try:
    __version__ = importlib.metadata.version("lamstack")
except importlib.metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0+unknown"

__all__ = [
    "BoundaryTag",
    "ConductorSpec",
    "ConfigError",
    "ConvergenceError",
    "DiscretizationConfig",
    "ExcitationMode",
    "InvalidArgumentError",
    "InvalidProblemError",
    "LaminationSpec",
    "LamstackError",
    "LossReport",
    "Mesh2D",
    "MeshError",
    "MethodId",
    "MultiscaleProblem",
    "RegionSpec",
    "SegmentGeometry",
    "SingularMatrixError",
    "SolutionField",
    "SolverError",
    "__version__",
    "biot_savart_H",
    "cross_section_fem",
    "integral_table",
    "lamination_1d",
    "losses",
    "make_rect_mesh",
    "make_segment_mesh",
    "read_msh",
    "reconstruct",
    "run",
    "segment_problem",
    "strip_problem",
]
