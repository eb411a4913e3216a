"""Reference solutions for a single laminated sheet.

These do not use the multiscale machinery: the 1D sheet solution is closed
form and the cross-section solver has its own linear-element assembler.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.integrate import quad
from scipy.sparse.linalg import spsolve

from ._errors import InvalidArgumentError, SingularMatrixError
from ._types import MU0, ComplexArray, FloatArray
from .mesh2d import Mesh2D, make_rect_mesh
from .microshape import LaminationSpec

logger = logging.getLogger(__name__)


def _positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise InvalidArgumentError(f"{name} must be positive and finite, got {value}")


def skin_depth(frequency: float, mu: float, sigma: float) -> float:
    """``sqrt(2 / (omega mu sigma))`` [m]."""
    _positive(frequency=frequency, mu=mu, sigma=sigma)
    return math.sqrt(2.0 / (2.0 * math.pi * frequency * mu * sigma))


def low_frequency_loss_density(sigma: float, frequency: float, b_peak: float, d: float) -> float:
    """Classical eddy loss density ``sigma omega^2 B^2 d^2 / 24`` [W/m^3]
    of a sheet with uniform peak flux density ``b_peak``."""
    _positive(sigma=sigma, frequency=frequency, d=d)
    omega = 2.0 * math.pi * frequency
    return sigma * omega**2 * b_peak**2 * d**2 / 24.0


@dataclass(frozen=True)
class LaminationProfile:
    """Field of an infinite sheet ``|z| <= d/2`` with surface field ``h0``."""

    h0: complex
    d: float
    sigma: float
    mu: float
    frequency: float

    def __post_init__(self) -> None:
        _positive(d=self.d, sigma=self.sigma, mu=self.mu, frequency=self.frequency)

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def delta(self) -> float:
        return skin_depth(self.frequency, self.mu, self.sigma)

    @property
    def gamma(self) -> complex:
        return (1 + 1j) / self.delta

    def H(self, z: float | FloatArray) -> ComplexArray:
        """Tangential field ``h0 cosh(gamma z) / cosh(gamma d / 2)``."""
        z = np.asarray(z, dtype=np.float64)
        return self.h0 * np.cosh(self.gamma * z) / cmath.cosh(self.gamma * self.d / 2)

    def J(self, z: float | FloatArray) -> ComplexArray:
        """Current density ``dH/dz`` across the sheet."""
        z = np.asarray(z, dtype=np.float64)
        return self.h0 * self.gamma * np.sinh(self.gamma * z) / cmath.cosh(self.gamma * self.d / 2)

    def ode_residual(self, z: float | FloatArray) -> FloatArray:
        """Relative residual of ``H'' - j omega mu sigma H = 0``."""
        z = np.asarray(z, dtype=np.float64)
        h = self.H(z)
        second = self.gamma**2 * h
        return np.abs(second - 1j * self.omega * self.mu * self.sigma * h) / np.maximum(np.abs(second), 1e-300)

    @cached_property
    def loss(self) -> float:
        """Loss per unit sheet surface [W/m^2], ``1/2 int rho |J|^2 dz``."""
        half = 0.5 * self.d

        def density(z: float) -> float:
            return 0.5 / self.sigma * abs(complex(self.J(z))) ** 2

        scale = density(half) * self.d
        value, _err = quad(density, -half, half, epsabs=1e-14 * max(scale, 1e-300), epsrel=1e-12)
        return float(value)

    @property
    def loss_density(self) -> float:
        """Mean loss per unit volume [W/m^3]."""
        return self.loss / self.d


def lamination_1d(h0: complex, d: float, sigma: float, mu: float, frequency: float) -> LaminationProfile:
    return LaminationProfile(complex(h0), d, sigma, mu, frequency)


# ---------------------------------------------------------------------------
# cross-section oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossSectionProblem:
    """Sheet cross-section ``[0, width] x [-d/2, d/2]`` with ``H = h0`` on its boundary."""

    width: float
    thickness: float
    sigma: float
    mu: float
    frequency: float
    h0: complex

    def __post_init__(self) -> None:
        _positive(
            width=self.width, thickness=self.thickness, sigma=self.sigma, mu=self.mu, frequency=self.frequency
        )
        if not cmath.isfinite(complex(self.h0)):
            raise InvalidArgumentError(f"h0 must be finite, got {self.h0}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency


@dataclass(frozen=True, eq=False)
class CrossSectionResult:
    """Nodal field and losses per unit length [W/m] of the cross-section."""

    problem: CrossSectionProblem
    mesh: Mesh2D
    H: ComplexArray
    P: float
    P_EE: float
    nx: int
    nz: int

    def column(self, x: float) -> tuple[FloatArray, ComplexArray]:
        """``(z, H)`` along the vertex column nearest to ``x``."""
        i = int(round(np.clip(x / self.problem.width, 0.0, 1.0) * self.nx))
        index = np.arange(self.nz + 1) * (self.nx + 1) + i
        return self.mesh.vertices[index, 1], self.H[index]

    def row(self, z: float) -> tuple[FloatArray, ComplexArray]:
        """``(x, H)`` along the vertex row nearest to ``z``."""
        half = 0.5 * self.problem.thickness
        j = int(round(np.clip((z + half) / (2 * half), 0.0, 1.0) * self.nz))
        index = j * (self.nx + 1) + np.arange(self.nx + 1)
        return self.mesh.vertices[index, 0], self.H[index]


def _p1_gradients(corners: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Barycentric gradients ``(F, 3, 2)`` and areas of straight triangles."""
    x, y = corners[..., 0], corners[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.empty(corners.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (y[:, j] - y[:, k]) / det
        grads[:, i, 1] = (x[:, k] - x[:, j]) / det
    return grads, 0.5 * np.abs(det)


def cross_section_fem(problem: CrossSectionProblem, nx: int, nz: int) -> CrossSectionResult:
    """Linear-element solution of ``div(rho grad H) = j omega mu H``.

    ``J_x`` and ``J_z`` are the z- and x-derivatives of ``H``; the edge
    effect loss ``P_EE`` is the part carried by ``J_z``.
    """
    if nx < 4 or nz < 4:
        raise InvalidArgumentError(f"nx and nz must be at least 4, got {nx} and {nz}")
    half = 0.5 * problem.thickness
    mesh = make_rect_mesh(problem.width, problem.thickness, nx, nz, origin=(0.0, -half), pattern="mirror")
    corners = mesh.vertices[mesh.triangles]
    grads, area = _p1_gradients(corners)
    rho = 1.0 / problem.sigma
    stiffness = rho * area[:, None, None] * np.einsum("fid,fjd->fij", grads, grads)
    mass = (1j * problem.omega * problem.mu) * area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    local = stiffness + mass
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.num_vertices
    matrix = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    boundary = np.unique(mesh.boundary_edges)
    free = np.setdiff1d(np.arange(n), boundary)
    h = np.zeros(n, dtype=np.complex128)
    h[boundary] = complex(problem.h0)
    rhs = -(matrix[free][:, boundary] @ h[boundary])
    solution = spsolve(matrix[free][:, free].tocsc(), rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularMatrixError("cross-section system is singular")
    h[free] = solution

    grad_h = np.einsum("fi,fid->fd", h[mesh.triangles], grads)
    density = 0.5 * rho * area
    p_ee = float(np.sum(density * np.abs(grad_h[:, 0]) ** 2))
    total = p_ee + float(np.sum(density * np.abs(grad_h[:, 1]) ** 2))
    logger.debug("cross-section %dx%d: P=%.6e W/m, P_EE=%.6e W/m", nx, nz, total, p_ee)
    return CrossSectionResult(problem, mesh, h, total, p_ee, nx, nz)


@dataclass(frozen=True)
class StripReference:
    """Losses per lamination period and unit strip length [W/m]."""

    P_ref: float
    P_EE_ref: float
    delta: float
    nx: int
    nz: int

    def as_dict(self) -> dict[str, float | int]:
        return {"P_ref": self.P_ref, "P_EE_ref": self.P_EE_ref, "delta": self.delta, "nx": self.nx, "nz": self.nz}


def strip_reference(
    width: float,
    lamination: LaminationSpec,
    sigma: float,
    mu_r: float,
    frequency: float,
    h0: complex,
    *,
    nx: int = 400,
    nz: int = 40,
) -> StripReference:
    """Fine cross-section losses in the normalization of the multiscale strip.

    The insulation carries no current, so the loss of one period is the
    loss of its iron sheet.
    """
    mu = MU0 * mu_r
    problem = CrossSectionProblem(width, lamination.d, sigma, mu, frequency, complex(h0))
    result = cross_section_fem(problem, nx, nz)
    return StripReference(result.P, result.P_EE, skin_depth(frequency, mu, sigma), nx, nz)
