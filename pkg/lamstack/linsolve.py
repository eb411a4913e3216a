"""Sparse direct and iterative solvers for complex-symmetric systems."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import IO, Any

import numpy as np
import scipy.io
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, SuperLU, splu
from scipy.sparse.linalg import bicgstab as scipy_bicgstab

from ._errors import BreakdownError, ConvergenceError, InvalidArgumentError, SingularMatrixError
from ._types import ComplexArray, FloatArray

logger = logging.getLogger(__name__)

RESIDUAL_TARGET = 1e-10
DENSE_DIAGNOSIS_LIMIT = 2000


def as_csr(matrix: Any) -> sparse.csr_matrix:
    """Complex CSR copy with sorted, unique column indices per row."""
    csr = sparse.csr_matrix(matrix, dtype=np.complex128, copy=True)
    if csr.shape[0] != csr.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got shape {csr.shape}")
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


@dataclass(frozen=True, eq=False)
class Factors:
    """LU factors of ``D A D`` with the symmetric equilibration ``D``."""

    lu: SuperLU
    scale: FloatArray
    matrix: sparse.csr_matrix
    seconds: float

    @property
    def n(self) -> int:
        return int(self.scale.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.lu.L.nnz + self.lu.U.nnz)


def _equilibration(matrix: sparse.csr_matrix) -> FloatArray:
    diagonal = np.abs(matrix.diagonal())
    row_max = np.asarray(abs(matrix).max(axis=1).todense()).ravel()
    magnitude = np.where(diagonal > 0, diagonal, row_max)
    return np.where(magnitude > 0, 1.0 / np.sqrt(np.where(magnitude > 0, magnitude, 1.0)), 1.0)


def _singular_index(matrix: sparse.csr_matrix) -> int | None:
    empty = np.flatnonzero(np.diff(matrix.indptr) == 0)
    if empty.size:
        return int(empty[0])
    if matrix.shape[0] > DENSE_DIAGNOSIS_LIMIT:
        return None
    import scipy.linalg

    _p, _l, u = scipy.linalg.lu(matrix.toarray())
    pivots = np.abs(np.diag(u))
    tol = pivots.max(initial=0.0) * matrix.shape[0] * np.finfo(float).eps
    small = np.flatnonzero(pivots <= tol)
    return int(small[0]) if small.size else None


def factorize(matrix: Any) -> Factors:
    """LU factorization with a fill-reducing minimum-degree ordering on ``A + A^T``.

    The matrix is equilibrated symmetrically first, which keeps complex
    symmetry. Raises :class:`SingularMatrixError` on an exactly singular
    factor.
    """
    csr = as_csr(matrix)
    scale = _equilibration(csr)
    d = sparse.diags(scale)
    scaled = (d @ csr @ d).tocsc()
    start = time.perf_counter()
    try:
        lu = splu(scaled, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc), index=_singular_index(csr)) from None
    seconds = time.perf_counter() - start
    logger.debug("factorized n=%d nnz=%d fill=%d in %.3fs", csr.shape[0], csr.nnz, lu.L.nnz + lu.U.nnz, seconds)
    return Factors(lu=lu, scale=scale, matrix=csr, seconds=seconds)


def solve_linear(factors: Factors, rhs: ComplexArray, *, refine: int = 3) -> ComplexArray:
    """Solve with existing factors; a few steps of iterative refinement follow
    when the relative residual is above :data:`RESIDUAL_TARGET`."""
    b = np.asarray(rhs, dtype=np.complex128)
    if b.shape != (factors.n,):
        raise InvalidArgumentError(f"right-hand side has shape {b.shape}, expected ({factors.n},)")
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros_like(b)

    def correction(r: ComplexArray) -> ComplexArray:
        return factors.scale * factors.lu.solve(factors.scale * r)

    x = correction(b)
    residual = float(np.linalg.norm(b - factors.matrix @ x)) / norm_b
    for _ in range(refine):
        if residual <= RESIDUAL_TARGET:
            break
        x = x + correction(b - factors.matrix @ x)
        residual = float(np.linalg.norm(b - factors.matrix @ x)) / norm_b
    if residual > RESIDUAL_TARGET:
        logger.warning("relative residual %.3e above %.0e after refinement", residual, RESIDUAL_TARGET)
    return x


def solve(matrix: Any, rhs: ComplexArray) -> ComplexArray:
    return solve_linear(factorize(matrix), rhs)


@dataclass
class IterativeResult:
    x: ComplexArray
    iterations: int
    history: list[float] = field(default_factory=list)


def bicgstab(
    matrix: Any,
    rhs: ComplexArray,
    *,
    tol: float = 1e-10,
    maxit: int = 1000,
    precondition: bool = True,
) -> IterativeResult:
    """BiCGStab with an optional Jacobi preconditioner.

    Raises :class:`ConvergenceError` when ``maxit`` is exhausted and
    :class:`BreakdownError` on a breakdown; both carry the residual history.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tolerance must be positive, got {tol}")
    csr = as_csr(matrix)
    b = np.asarray(rhs, dtype=np.complex128)
    if b.shape != (csr.shape[0],):
        raise InvalidArgumentError(f"right-hand side has shape {b.shape}, expected ({csr.shape[0]},)")
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return IterativeResult(np.zeros_like(b), 0, [0.0])

    preconditioner = None
    if precondition:
        diagonal = csr.diagonal()
        inverse = np.where(diagonal != 0, 1.0 / np.where(diagonal != 0, diagonal, 1.0), 1.0)
        preconditioner = LinearOperator(csr.shape, matvec=lambda v: inverse * v, dtype=np.complex128)

    history: list[float] = []

    def record(xk: ComplexArray) -> None:
        history.append(float(np.linalg.norm(b - csr @ xk)) / norm_b)

    x, info = scipy_bicgstab(csr, b, rtol=tol, atol=0.0, maxiter=maxit, M=preconditioner, callback=record)
    if info < 0:
        raise BreakdownError("bicgstab broke down", history)
    residual = float(np.linalg.norm(b - csr @ x)) / norm_b
    if info > 0 or residual > tol * 10:
        raise ConvergenceError(f"bicgstab reached residual {residual:.3e} > {tol:.1e}", history)
    if not history or history[-1] != residual:
        # scipy returns early without calling back once the half step converges
        history.append(residual)
    return IterativeResult(x=x, iterations=len(history), history=history)


@dataclass
class AugmentedResult:
    x: ComplexArray
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)


def solve_augmented(
    factors: Factors,
    rhs: ComplexArray,
    coupling: Any,
    *,
    gamma: float,
    free: np.ndarray | None = None,
    tol: float = 1e-10,
    maxit: int = 100,
) -> AugmentedResult:
    """Method of multipliers for ``A x = b`` subject to ``C x = 0``.

    ``factors`` hold ``A + gamma C`` with the positive semi-definite
    coupling ``C``. The multiplier enters the right-hand side as ``C m``
    on the ``free`` rows only, so rows of eliminated DOFs keep their
    prescribed values. ``history`` records the relative update of ``x``,
    which is proportional to the constraint violation ``C x``.
    """
    if not gamma > 0:
        raise InvalidArgumentError(f"augmentation weight must be positive, got {gamma}")
    if not tol > 0:
        raise InvalidArgumentError(f"tolerance must be positive, got {tol}")
    c = as_csr(coupling)
    b = np.asarray(rhs, dtype=np.complex128)
    if c.shape[0] != b.shape[0]:
        raise InvalidArgumentError(f"coupling has shape {c.shape}, right-hand side {b.shape}")
    mask = np.ones(b.shape[0]) if free is None else np.asarray(free, dtype=np.float64)

    multiplier = np.zeros_like(b)
    current = b
    x = solve_linear(factors, current)
    history: list[float] = []
    for _ in range(maxit):
        multiplier = multiplier + gamma * x
        current = b - mask * (c @ multiplier)
        update = solve_linear(factors, current)
        scale = float(np.linalg.norm(update))
        change = float(np.linalg.norm(update - x)) / scale if scale > 0 else 0.0
        history.append(change)
        x = update
        if change <= tol:
            break
    else:
        raise ConvergenceError(f"constraint update stalled at {history[-1]:.3e} > {tol:.1e}", history)
    norm = float(np.linalg.norm(current))
    residual = float(np.linalg.norm(current - factors.matrix @ x)) / norm if norm > 0 else 0.0
    logger.debug("augmented solve converged in %d updates, residual %.2e", len(history), residual)
    return AugmentedResult(x=x, iterations=len(history), residual=residual, history=history)


def write_matrix_market(target: str | IO[Any] | Any, matrix: Any) -> None:
    """Complex coordinate Matrix Market export, stored as symmetric when exact."""
    csr = as_csr(matrix)
    symmetric = (csr - csr.T).count_nonzero() == 0
    scipy.io.mmwrite(target, csr.tocoo(), symmetry="symmetric" if symmetric else "general")


def read_matrix_market(source: str | IO[Any] | Any) -> sparse.csr_matrix:
    return as_csr(scipy.io.mmread(source))
