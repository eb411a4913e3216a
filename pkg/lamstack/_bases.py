"""Hierarchical H1 and H(curl) shape functions in barycentric form.

Every function is written in terms of the barycentric coordinates of the
triangle taken in *sorted* vertex order (ascending global index). A scalar
function is a polynomial in ``lambda``; a vector function is
``sum_i c_i(lambda) grad(lambda_i)`` with polynomial coefficients ``c_i``.
Both forms are element independent, so a tabulation on quadrature points
is mapped to any triangle by the gradients of its barycentric coordinates
alone.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from ._errors import InvalidArgumentError
from ._types import FloatArray

Exponent = tuple[int, int, int]
EntityKind = Literal["vertex", "edge", "cell"]

LOCAL_EDGES: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))

# gradients of lambda on the reference triangle (lambda1 = x, lambda2 = y)
REFERENCE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# grad(lambda_j) x grad(lambda_i) = s * _EPS[j, i] with s = 1 / det
_EPS = np.array([[0, 1, -1], [-1, 0, 1], [1, -1, 0]], dtype=np.float64)


@dataclass(frozen=True)
class Poly:
    """Polynomial in barycentric coordinates as ``(coefficient, exponent)`` terms."""

    terms: tuple[tuple[float, Exponent], ...] = ()

    @classmethod
    def lam(cls, i: int) -> Poly:
        exponent = [0, 0, 0]
        exponent[i] = 1
        return cls(((1.0, (exponent[0], exponent[1], exponent[2])),))

    @classmethod
    def const(cls, value: float) -> Poly:
        return cls(((value, (0, 0, 0)),))

    def _collect(self, terms: Iterable[tuple[float, Exponent]]) -> Poly:
        merged: dict[Exponent, float] = {}
        for coef, exp in terms:
            merged[exp] = merged.get(exp, 0.0) + coef
        return Poly(tuple((c, e) for e, c in sorted(merged.items()) if c != 0.0))

    def __add__(self, other: Poly) -> Poly:
        return self._collect(self.terms + other.terms)

    def __sub__(self, other: Poly) -> Poly:
        return self + other * -1.0

    def __mul__(self, other: Poly | float) -> Poly:
        if not isinstance(other, Poly):
            return Poly(tuple((c * other, e) for c, e in self.terms))
        return self._collect(
            (c1 * c2, (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2]))
            for c1, e1 in self.terms
            for c2, e2 in other.terms
        )

    __rmul__ = __mul__

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)

    def derivative(self, i: int) -> Poly:
        out = []
        for coef, exp in self.terms:
            if exp[i]:
                lowered = list(exp)
                lowered[i] -= 1
                out.append((coef * exp[i], (lowered[0], lowered[1], lowered[2])))
        return self._collect(out)

    def __call__(self, lam: FloatArray) -> FloatArray:
        lam = np.atleast_2d(lam)
        result = np.zeros(lam.shape[0])
        for coef, exp in self.terms:
            result += coef * lam[:, 0] ** exp[0] * lam[:, 1] ** exp[1] * lam[:, 2] ** exp[2]
        return result


@dataclass(frozen=True)
class ShapeFunction:
    """One local function and the mesh entity that owns its global DOF."""

    coefficients: tuple[Poly, ...]  # one Poly for H1, three for H(curl)
    entity: EntityKind
    local_index: int
    layer: int


def _gradient(phi: Poly) -> tuple[Poly, Poly, Poly]:
    return (phi.derivative(0), phi.derivative(1), phi.derivative(2))


def _whitney(a: int, b: int) -> tuple[Poly, Poly, Poly]:
    coefs = [Poly(), Poly(), Poly()]
    coefs[a] = Poly.lam(b) * -1.0
    coefs[b] = Poly.lam(a)
    return (coefs[0], coefs[1], coefs[2])


def _edge_bubbles(a: int, b: int) -> list[Poly]:
    la, lb = Poly.lam(a), Poly.lam(b)
    quadratic = la * lb * 4.0
    return [quadratic, quadratic * (lb - la)]


def _cell_bubble() -> Poly:
    return Poly.lam(0) * Poly.lam(1) * Poly.lam(2) * 27.0


@lru_cache(maxsize=None)
def h1_functions(order: int) -> tuple[ShapeFunction, ...]:
    """Local H1 functions: vertices, then edge layers, then the cell bubble."""
    if order not in (1, 2, 3):
        raise InvalidArgumentError(f"nodal order must be 1, 2 or 3, got {order}")
    functions = [ShapeFunction((Poly.lam(i),), "vertex", i, 0) for i in range(3)]
    for layer in range(order - 1):
        for e, (a, b) in enumerate(LOCAL_EDGES):
            functions.append(ShapeFunction((_edge_bubbles(a, b)[layer],), "edge", e, layer))
    if order == 3:
        functions.append(ShapeFunction((_cell_bubble(),), "cell", 0, 0))
    return tuple(functions)


def _interior_candidates(order: int) -> list[tuple[Poly, Poly, Poly]]:
    candidates: list[tuple[Poly, Poly, Poly]] = []
    if order == 2:
        candidates.append(_gradient(Poly.lam(0) * Poly.lam(1) * Poly.lam(2)))
    extra = [Poly.const(1.0)] if order == 1 else [Poly.const(1.0)] + [Poly.lam(i) for i in range(3)]
    for factor in extra:
        for (a, b), c in zip(LOCAL_EDGES, (2, 1, 0), strict=True):
            whitney = _whitney(a, b)
            scale = factor * Poly.lam(c)
            candidates.append(tuple(scale * w for w in whitney))  # type: ignore[arg-type]
    return candidates


def _sample_vector(coefficients: tuple[Poly, ...], lam: FloatArray) -> FloatArray:
    values = np.stack([p(lam) for p in coefficients], axis=1)
    return (values @ REFERENCE_GRADIENTS).ravel()


def _greedy_select(
    fixed: list[tuple[Poly, ...]], candidates: list[tuple[Poly, Poly, Poly]], wanted: int
) -> list[tuple[Poly, Poly, Poly]]:
    from ._quadrature import quadrature

    lam = quadrature(8).barycentric
    basis = [_sample_vector(f, lam) for f in fixed]
    rank = np.linalg.matrix_rank(np.array(basis).T) if basis else 0
    chosen: list[tuple[Poly, Poly, Poly]] = []
    for candidate in candidates:
        trial = basis + [_sample_vector(candidate, lam)]
        trial_rank = np.linalg.matrix_rank(np.array(trial).T, tol=1e-10)
        if trial_rank > rank:
            basis, rank = trial, trial_rank
            chosen.append(candidate)
        if len(chosen) == wanted:
            return chosen
    raise RuntimeError(f"could only select {len(chosen)} of {wanted} interior functions")


HCURL_LOCAL_DIMENSION = {0: 3, 1: 8, 2: 15}


@lru_cache(maxsize=None)
def hcurl_functions(order: int) -> tuple[ShapeFunction, ...]:
    """Local H(curl) functions of the first-kind Nedelec space.

    Edge layer 0 holds the Whitney functions, higher edge layers gradients
    of the H1 edge bubbles; interior functions are gradient of the cell
    bubble (order 2) and ``lambda`` multiples of Whitney functions, picked
    for linear independence.
    """
    if order not in HCURL_LOCAL_DIMENSION:
        raise InvalidArgumentError(f"edge order must be 0, 1 or 2, got {order}")
    functions = [ShapeFunction(_whitney(a, b), "edge", e, 0) for e, (a, b) in enumerate(LOCAL_EDGES)]
    for layer in range(order):
        for e, (a, b) in enumerate(LOCAL_EDGES):
            functions.append(ShapeFunction(_gradient(_edge_bubbles(a, b)[layer]), "edge", e, layer + 1))
    wanted = HCURL_LOCAL_DIMENSION[order] - len(functions)
    if wanted:
        interior = _greedy_select(
            [f.coefficients for f in functions], _interior_candidates(order), wanted
        )
        functions += [ShapeFunction(c, "cell", 0, j) for j, c in enumerate(interior)]
    return tuple(functions)


@dataclass(frozen=True, eq=False)
class ScalarTable:
    """Values ``(nq, nloc)`` and lambda-derivatives ``(nq, nloc, 3)``."""

    values: FloatArray
    dlam: FloatArray


@dataclass(frozen=True, eq=False)
class VectorTable:
    """Coefficients of ``grad(lambda_i)`` ``(nq, nloc, 3)`` and curl factors ``(nq, nloc)``.

    The physical curl is the curl factor divided by the signed determinant
    of the sorted-order element map.
    """

    coefficients: FloatArray
    curl: FloatArray


def tabulate_h1(order: int, lam: FloatArray) -> ScalarTable:
    lam = np.atleast_2d(lam)
    functions = h1_functions(order)
    values = np.stack([f.coefficients[0](lam) for f in functions], axis=1)
    dlam = np.stack(
        [np.stack([f.coefficients[0].derivative(i)(lam) for i in range(3)], axis=1) for f in functions],
        axis=1,
    )
    return ScalarTable(values=values, dlam=dlam)


def tabulate_hcurl(order: int, lam: FloatArray) -> VectorTable:
    lam = np.atleast_2d(lam)
    functions = hcurl_functions(order)
    coefficients = np.stack(
        [np.stack([c(lam) for c in f.coefficients], axis=1) for f in functions], axis=1
    )
    curl = np.zeros((lam.shape[0], len(functions)))
    for n, f in enumerate(functions):
        for i in range(3):
            for j in range(3):
                if _EPS[j, i]:
                    curl[:, n] += _EPS[j, i] * f.coefficients[i].derivative(j)(lam)
    return VectorTable(coefficients=coefficients, curl=curl)


def _reference_lambda(point: tuple[float, float] | FloatArray) -> FloatArray:
    x, y = float(point[0]), float(point[1])
    if x < -1e-12 or y < -1e-12 or x + y > 1 + 1e-12:
        raise InvalidArgumentError(f"point ({x}, {y}) is outside the reference triangle")
    return np.array([[1.0 - x - y, x, y]])


def h1_eval(order: int, point: tuple[float, float] | FloatArray) -> tuple[FloatArray, FloatArray]:
    """Values ``(nloc,)`` and reference gradients ``(nloc, 2)`` at one point."""
    table = tabulate_h1(order, _reference_lambda(point))
    return table.values[0], table.dlam[0] @ REFERENCE_GRADIENTS


def hcurl_eval(order: int, point: tuple[float, float] | FloatArray) -> tuple[FloatArray, FloatArray]:
    """Reference vector values ``(nloc, 2)`` and scalar curls ``(nloc,)`` at one point."""
    table = tabulate_hcurl(order, _reference_lambda(point))
    return table.coefficients[0] @ REFERENCE_GRADIENTS, table.curl[0]
