"""Finite element spaces, block assembly and essential boundary conditions.

Spaces are defined on a (region subset of a) :class:`~lamstack.mesh2d.Mesh2D`.
DOFs belong to mesh entities (vertices, edges, cells) and are numbered by
entity kind, then layer, then global entity index, restricted to the
entities touched by the support.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Literal, TypeAlias

import numpy as np
from scipy import sparse

from ._bases import (
    LOCAL_EDGES,
    ShapeFunction,
    h1_functions,
    hcurl_functions,
    tabulate_h1,
    tabulate_hcurl,
)
from ._errors import InvalidArgumentError, InvalidProblemError, OutsideDomainError
from ._quadrature import default_degree, line_quadrature, quadrature
from ._types import BlockName, BoundaryTag, ComplexArray, FloatArray, IntArray
from .mesh2d import Mesh2D, barycentric

logger = logging.getLogger(__name__)

Operator = Literal["value", "grad", "rotgrad", "curl"]


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Per-triangle data in sorted vertex order."""

    corners: FloatArray  # (F, 3, 2)
    grad_lambda: FloatArray  # (F, 3, 2)
    det: FloatArray  # (F,) signed

    @property
    def area(self) -> FloatArray:
        return 0.5 * np.abs(self.det)


@lru_cache(maxsize=32)
def element_geometry(mesh: Mesh2D) -> ElementGeometry:
    corners = mesh.vertices[mesh.sorted_triangles]
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grad = np.stack([-g1 - g2, g1, g2], axis=1)
    return ElementGeometry(corners=corners, grad_lambda=grad, det=det)


class Space:
    """Conforming space on the triangles of ``regions`` (all when ``None``)."""

    kind: Literal["h1", "hcurl"]

    def __init__(self, mesh: Mesh2D, order: int, regions: Sequence[int] | None = None) -> None:
        self.mesh = mesh
        self.order = order
        self.regions = None if regions is None else tuple(sorted(int(r) for r in regions))
        self.cells = mesh.support_triangles(self.regions)
        if self.cells.size == 0:
            raise InvalidProblemError(f"space support {self.regions} contains no triangles")
        self.functions = self._functions()
        raw = self._raw_dofmap()
        self._raw_ids, inverse = np.unique(raw, return_inverse=True)
        self.dofmap: IntArray = inverse.reshape(raw.shape).astype(np.int64)
        self.cell_index = np.full(mesh.num_triangles, -1, dtype=np.int64)
        self.cell_index[self.cells] = np.arange(self.cells.size)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} order={self.order} regions={self.regions} ndofs={self.ndofs}>"

    def _functions(self) -> tuple[ShapeFunction, ...]:
        raise NotImplementedError

    @property
    def ndofs(self) -> int:
        return int(self._raw_ids.size)

    @property
    def nloc(self) -> int:
        return len(self.functions)

    @cached_property
    def _offsets(self) -> dict[tuple[str, int], int]:
        counts = {"vertex": self.mesh.num_vertices, "edge": self.mesh.num_edges, "cell": self.mesh.num_triangles}
        offsets: dict[tuple[str, int], int] = {}
        position = 0
        for kind in ("vertex", "edge", "cell"):
            layers = sorted({f.layer for f in self.functions if f.entity == kind})
            for layer in layers:
                offsets[(kind, layer)] = position
                position += counts[kind]
        return offsets

    def _raw_dofmap(self) -> IntArray:
        mesh = self.mesh
        entity = {
            "vertex": mesh.sorted_triangles[self.cells],
            "edge": mesh.triangle_edges[self.cells],
            "cell": self.cells[:, None],
        }
        columns = [
            self._offsets[(f.entity, f.layer)] + entity[f.entity][:, f.local_index]
            for f in self.functions
        ]
        return np.stack(columns, axis=1).astype(np.int64)

    def entity_dofs(self, kind: str, layer: int, ids: IntArray) -> IntArray:
        """Space DOF indices of entity DOFs; ``-1`` where outside the support."""
        if (kind, layer) not in self._offsets:
            return np.full(len(ids), -1, dtype=np.int64)
        raw = self._offsets[(kind, layer)] + np.asarray(ids, dtype=np.int64)
        pos = np.minimum(np.searchsorted(self._raw_ids, raw), self.ndofs - 1)
        return np.where(self._raw_ids[pos] == raw, pos, -1).astype(np.int64)

    @property
    def layers(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for f in self.functions:
            out[f.entity] = max(out.get(f.entity, 0), f.layer + 1)
        return out

    @property
    def poly_degree(self) -> int:
        raise NotImplementedError

    def tabulate(self, op: Operator, rule_lam: FloatArray, cells: IntArray) -> FloatArray:
        """Physical values of ``op`` applied to every local function.

        Returns ``(len(cells), nq, nloc)`` for scalars and
        ``(len(cells), nq, nloc, 2)`` for vectors.
        """
        raise NotImplementedError

    def locate(self, points: FloatArray) -> tuple[IntArray, FloatArray]:
        """Containing triangle and sorted-order barycentric coordinates."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        tri = self.mesh.locate(points)
        if np.any(tri < 0):
            bad = points[int(np.flatnonzero(tri < 0)[0])]
            raise OutsideDomainError(f"point ({bad[0]}, {bad[1]}) lies outside the mesh")
        geo = element_geometry(self.mesh)
        lam = np.stack([barycentric(geo.corners[t : t + 1], p)[0] for t, p in zip(tri, points, strict=True)])
        return tri, lam

    def evaluate(self, coefficients: ComplexArray, op: Operator, points: FloatArray) -> ComplexArray:
        """Field of ``coefficients`` at physical points; zero outside the support."""
        tri, lam = self.locate(points)
        out_shape = (len(tri), 2) if self.is_vector(op) else (len(tri),)
        out = np.zeros(out_shape, dtype=np.complex128)
        for k, (t, l) in enumerate(zip(tri, lam, strict=True)):
            local = self.cell_index[t]
            if local < 0:
                continue
            basis = self.tabulate(op, l[None, :], np.array([t]))[0, 0]
            coef = coefficients[self.dofmap[local]]
            out[k] = np.tensordot(coef, basis, axes=(0, 0))
        return out

    def evaluate_cells(
        self, coefficients: ComplexArray, op: Operator, triangles: IntArray, lam: FloatArray
    ) -> ComplexArray:
        """Field at the same sorted-order barycentric point of each triangle."""
        triangles = np.asarray(triangles, dtype=np.int64)
        vector = self.is_vector(op)
        out = np.zeros((len(triangles), 2) if vector else (len(triangles),), dtype=np.complex128)
        inside = self.cell_index[triangles] >= 0
        tris = triangles[inside]
        if tris.size:
            basis = self.tabulate(op, np.atleast_2d(lam), tris)[:, 0]
            coef = coefficients[self.dofmap[self.cell_index[tris]]]
            out[inside] = np.einsum("cl,cl...->c...", coef, basis)
        return out

    def is_vector(self, op: Operator) -> bool:
        raise NotImplementedError


class ScalarSpace(Space):
    """Hierarchical H1 space of order 1, 2 or 3."""

    kind = "h1"

    def _functions(self) -> tuple[ShapeFunction, ...]:
        return h1_functions(self.order)

    @property
    def poly_degree(self) -> int:
        return self.order

    def is_vector(self, op: Operator) -> bool:
        if op not in ("value", "grad", "rotgrad"):
            raise InvalidArgumentError(f"operator {op!r} is not defined on a scalar space")
        return op != "value"

    def tabulate(self, op: Operator, rule_lam: FloatArray, cells: IntArray) -> FloatArray:
        table = tabulate_h1(self.order, rule_lam)
        if not self.is_vector(op):
            return np.broadcast_to(table.values, (len(cells), *table.values.shape))
        grad = np.einsum("qli,cid->cqld", table.dlam, element_geometry(self.mesh).grad_lambda[cells])
        if op == "rotgrad":
            return np.stack([grad[..., 1], -grad[..., 0]], axis=-1)
        return grad


class EdgeSpace(Space):
    """First-kind Nedelec space of order 0, 1 or 2."""

    kind = "hcurl"

    def _functions(self) -> tuple[ShapeFunction, ...]:
        return hcurl_functions(self.order)

    @property
    def poly_degree(self) -> int:
        return self.order + 1

    def is_vector(self, op: Operator) -> bool:
        if op not in ("value", "curl"):
            raise InvalidArgumentError(f"operator {op!r} is not defined on an edge space")
        return op == "value"

    def tabulate(self, op: Operator, rule_lam: FloatArray, cells: IntArray) -> FloatArray:
        table = tabulate_hcurl(self.order, rule_lam)
        geo = element_geometry(self.mesh)
        if op == "curl":
            return table.curl[None, :, :] / geo.det[cells][:, None, None]
        self.is_vector(op)
        return np.einsum("qli,cid->cqld", table.coefficients, geo.grad_lambda[cells])


# ---------------------------------------------------------------------------
# forms and assembly
# ---------------------------------------------------------------------------

FORM_KINDS: dict[str, tuple[Operator, Operator]] = {
    "mass": ("value", "value"),
    "stiffness": ("grad", "grad"),
    "curlcurl": ("curl", "curl"),
    "vecmass": ("value", "value"),
    "mixed": ("grad", "value"),
    "rotmixed": ("rotgrad", "value"),
}

FieldFunction: TypeAlias = Callable[[FloatArray], ComplexArray]
BoundaryFunction: TypeAlias = Callable[[FloatArray, FloatArray], ComplexArray]


@dataclass(frozen=True)
class Form:
    """Bilinear form ``coef * int op_test(v) . op_trial(u)`` over ``regions``.

    An off-diagonal form is assembled into ``(test, trial)`` and mirrored
    into ``(trial, test)``; list each coupling once.
    """

    test: BlockName
    trial: BlockName
    kind: str
    coef: complex = 1.0
    regions: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in FORM_KINDS:
            raise InvalidArgumentError(
                f"unknown form kind {self.kind!r}, expected one of: {', '.join(FORM_KINDS)}"
            )
        test_op, trial_op = FORM_KINDS[self.kind]
        if self.test == self.trial and test_op != trial_op:
            raise InvalidArgumentError(f"{self.kind} form needs two different blocks")

    @property
    def operators(self) -> tuple[Operator, Operator]:
        return FORM_KINDS[self.kind]


@dataclass(frozen=True)
class SourceForm:
    """Linear form ``coef * int field . op(v)`` over ``regions``."""

    test: BlockName
    op: Operator
    field: FieldFunction
    coef: complex = 1.0
    regions: tuple[int, ...] | None = None


@dataclass(frozen=True)
class BoundarySource:
    """Linear form ``coef * int field(x, t) v ds`` over tagged boundary edges.

    ``t`` is the unit tangent running counter-clockwise around the support.
    """

    test: BlockName
    tags: tuple[BoundaryTag, ...]
    field: BoundaryFunction
    coef: complex = 1.0


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Complex-symmetric block system with optional eliminated constraints."""

    spaces: Mapping[BlockName, Space]
    matrix: sparse.csr_matrix
    rhs: ComplexArray
    constrained: IntArray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: ComplexArray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))
    original: BlockSystem | None = None

    @cached_property
    def layout(self) -> dict[BlockName, tuple[int, int]]:
        offsets: dict[BlockName, tuple[int, int]] = {}
        position = 0
        for name, space in self.spaces.items():
            offsets[name] = (position, space.ndofs)
            position += space.ndofs
        return offsets

    @property
    def size(self) -> int:
        return int(self.rhs.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    @property
    def num_free(self) -> int:
        return self.size - int(np.unique(self.constrained).size)

    def block_slice(self, name: BlockName | str) -> slice:
        try:
            offset, size = self.layout[BlockName(name)]
        except KeyError:
            raise InvalidProblemError(
                f"unknown block {name!r}, system has: {', '.join(self.layout)}"
            ) from None
        return slice(offset, offset + size)

    def block_of(self, index: int) -> BlockName:
        for name, (offset, size) in self.layout.items():
            if offset <= index < offset + size:
                return name
        raise InvalidArgumentError(f"index {index} is outside the system")

    def asymmetry(self) -> float:
        """``max |A - A^T|``; zero for every system built by :func:`assemble`."""
        diff = (self.matrix - self.matrix.T).tocoo()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def residual(self, x: ComplexArray) -> float:
        """Relative residual ``|A x - b| / |b|`` of this system."""
        r = self.matrix @ x - self.rhs
        scale = float(np.linalg.norm(self.rhs))
        if scale == 0.0:
            scale = max(float(np.linalg.norm(self.matrix @ x)), 1.0)
        return float(np.linalg.norm(r)) / scale

    def with_rhs(self, rhs: ComplexArray) -> BlockSystem:
        return BlockSystem(self.spaces, self.matrix, np.asarray(rhs, dtype=np.complex128),
                           self.constrained, self.values, self.original)

    def split(self, x: ComplexArray) -> dict[BlockName, ComplexArray]:
        return {name: x[self.block_slice(name)] for name in self.layout}

    def write_matrix_market(self, target: str | object) -> None:
        from .linsolve import write_matrix_market

        write_matrix_market(target, self.matrix)


def _common_mesh(spaces: Mapping[BlockName, Space]) -> Mesh2D:
    meshes = {id(space.mesh) for space in spaces.values()}
    if len(meshes) != 1:
        raise InvalidArgumentError("all spaces of a system must share one mesh")
    return next(iter(spaces.values())).mesh


def _space(spaces: Mapping[BlockName, Space], name: BlockName) -> Space:
    try:
        return spaces[name]
    except KeyError:
        raise InvalidArgumentError(
            f"form references unknown block {name!r}, declared: {', '.join(spaces)}"
        ) from None


def _cells(mesh: Mesh2D, regions: tuple[int, ...] | None, *spaces: Space) -> IntArray:
    mask = np.ones(mesh.num_triangles, dtype=bool)
    for space in spaces:
        mask &= space.cell_index >= 0
    if regions is not None:
        mask &= np.isin(mesh.regions, np.asarray(regions, dtype=np.int64))
    return np.flatnonzero(mask)


def _contract(weights: FloatArray, left: FloatArray, right: FloatArray) -> FloatArray:
    if left.ndim != right.ndim:
        raise InvalidArgumentError("form pairs a scalar with a vector operator")
    if left.ndim == 4:
        return np.einsum("cq,cqid,cqjd->cij", weights, left, right)
    return np.einsum("cq,cqi,cqj->cij", weights, left, right)


def assemble(
    forms: Iterable[Form],
    spaces: Mapping[BlockName, Space],
    sources: Iterable[SourceForm | BoundarySource] = (),
    *,
    degree: int | None = None,
    source_degree: int | None = None,
) -> BlockSystem:
    """Assemble a block system from bilinear and linear forms.

    Contributions are reduced in form order, then element order, so the
    result does not depend on anything but the inputs. The matrix is
    symmetrized exactly.
    """
    mesh = _common_mesh(spaces)
    geo = element_geometry(mesh)
    if degree is None:
        degree = default_degree(max(s.poly_degree for s in spaces.values()))
    rule = quadrature(degree)
    empty = BlockSystem(spaces, sparse.csr_matrix((0, 0)), np.zeros(0, dtype=np.complex128))
    layout = empty.layout
    size = sum(s.ndofs for s in spaces.values())

    rows: list[IntArray] = []
    cols: list[IntArray] = []
    data: list[ComplexArray] = []
    for form in forms:
        test, trial = _space(spaces, form.test), _space(spaces, form.trial)
        cells = _cells(mesh, form.regions, test, trial)
        if cells.size == 0 or form.coef == 0:
            continue
        test_op, trial_op = form.operators
        weights = rule.weights[None, :] * np.abs(geo.det[cells])[:, None]
        local = form.coef * _contract(
            weights,
            test.tabulate(test_op, rule.barycentric, cells),
            trial.tabulate(trial_op, rule.barycentric, cells),
        )
        r = layout[form.test][0] + test.dofmap[test.cell_index[cells]]
        c = layout[form.trial][0] + trial.dofmap[trial.cell_index[cells]]
        rr = np.broadcast_to(r[:, :, None], local.shape)
        cc = np.broadcast_to(c[:, None, :], local.shape)
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        data.append(local.ravel())
        if form.test != form.trial:
            rows.append(cc.ravel())
            cols.append(rr.ravel())
            data.append(local.ravel())
    if rows:
        coo = sparse.coo_matrix(
            (np.concatenate(data).astype(np.complex128), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        )
        matrix = coo.tocsr()
    else:
        matrix = sparse.csr_matrix((size, size), dtype=np.complex128)
    matrix = (0.5 * (matrix + matrix.T)).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()

    rhs = np.zeros(size, dtype=np.complex128)
    source_rule = quadrature(source_degree or min(10, degree + 2))
    for source in sources:
        if isinstance(source, BoundarySource):
            _boundary_source(rhs, mesh, spaces, layout, source)
            continue
        space = _space(spaces, source.test)
        cells = _cells(mesh, source.regions, space)
        if cells.size == 0 or source.coef == 0:
            continue
        weights = source_rule.weights[None, :] * np.abs(geo.det[cells])[:, None]
        points = np.einsum("qi,cid->cqd", source_rule.barycentric, geo.corners[cells])
        values = np.asarray(source.field(points.reshape(-1, 2)), dtype=np.complex128)
        basis = space.tabulate(source.op, source_rule.barycentric, cells)
        if basis.ndim == 4:
            values = values.reshape(len(cells), -1, 2)
            local = np.einsum("cq,cqid,cqd->ci", weights, basis, values)
        else:
            values = values.reshape(len(cells), -1)
            local = np.einsum("cq,cqi,cq->ci", weights, basis, values)
        dofs = layout[source.test][0] + space.dofmap[space.cell_index[cells]]
        np.add.at(rhs, dofs.ravel(), (source.coef * local).ravel())

    logger.debug("assembled %d dofs, %d nonzeros, blocks %s", size, matrix.nnz, dict(layout))
    return BlockSystem(spaces, matrix, rhs)


def _edge_owners(mesh: Mesh2D, space: Space, edges: IntArray) -> tuple[IntArray, IntArray]:
    """Support triangle and sorted-local index of each edge."""
    owner = np.full(mesh.num_edges, -1, dtype=np.int64)
    local = np.full(mesh.num_edges, -1, dtype=np.int64)
    for j in range(3):
        owner[mesh.triangle_edges[space.cells, j]] = space.cells
        local[mesh.triangle_edges[space.cells, j]] = j
    return owner[edges], local[edges]


def _boundary_source(
    rhs: ComplexArray,
    mesh: Mesh2D,
    spaces: Mapping[BlockName, Space],
    layout: Mapping[BlockName, tuple[int, int]],
    source: BoundarySource,
) -> None:
    space = _space(spaces, source.test)
    edges = np.concatenate([mesh.tagged_edges(tag) for tag in source.tags]) if source.tags else np.zeros(0, np.int64)
    owner, local = _edge_owners(mesh, space, edges)
    keep = owner >= 0
    edges, owner, local = edges[keep], owner[keep], local[keep]
    s, w = line_quadrature(6)
    geo = element_geometry(mesh)
    for j, (a, b) in enumerate(LOCAL_EDGES):
        sel = local == j
        if not np.any(sel):
            continue
        tris = owner[sel]
        lam = np.zeros((s.size, 3))
        lam[:, a] = 1.0 - s
        lam[:, b] = s
        pa, pb = geo.corners[tris, a], geo.corners[tris, b]
        length = np.linalg.norm(pb - pa, axis=1)
        tangent = mesh.orientation[tris, j][:, None] * (pb - pa) / length[:, None]
        points = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
        tangents = np.broadcast_to(tangent[:, None, :], points.shape)
        values = np.asarray(
            source.field(points.reshape(-1, 2), tangents.reshape(-1, 2)), dtype=np.complex128
        ).reshape(len(tris), s.size)
        basis = space.tabulate("value", lam, tris)
        if basis.ndim != 3:
            raise InvalidArgumentError("boundary sources need a scalar test space")
        contribution = np.einsum("q,c,cq,cqi->ci", w, length, values, basis)
        dofs = layout[source.test][0] + space.dofmap[space.cell_index[tris]]
        np.add.at(rhs, dofs.ravel(), (source.coef * contribution).ravel())


# ---------------------------------------------------------------------------
# essential boundary conditions
# ---------------------------------------------------------------------------

VectorData: TypeAlias = tuple[complex, complex] | FieldFunction | None
ScalarData: TypeAlias = complex | FieldFunction | None


@dataclass(frozen=True, eq=False)
class Constraint:
    """Prescribed values of space-local DOFs of one block."""

    block: BlockName
    dofs: IntArray
    values: ComplexArray

    def __post_init__(self) -> None:
        if len(self.dofs) != len(self.values):
            raise InvalidArgumentError("one value per constrained DOF required")


def _vector_field(data: VectorData) -> FieldFunction:
    if data is None:
        return lambda x: np.zeros((len(x), 2), dtype=np.complex128)
    if callable(data):
        return data
    vec = np.asarray(data, dtype=np.complex128)
    if vec.shape != (2,):
        raise InvalidArgumentError("a constant tangential trace needs two components")
    return lambda x: np.broadcast_to(vec, (len(x), 2))


def _scalar_field(data: ScalarData) -> FieldFunction:
    if data is None:
        return lambda x: np.zeros(len(x), dtype=np.complex128)
    if callable(data):
        return data
    value = complex(data)
    return lambda x: np.full(len(x), value, dtype=np.complex128)


def _edge_bubble_traces(order: int, s: FloatArray) -> list[FloatArray]:
    """H1 edge bubbles along ``lambda_a = 1 - s``, ``lambda_b = s``."""
    bubbles = [4.0 * s * (1.0 - s), 4.0 * s * (1.0 - s) * (2.0 * s - 1.0)]
    return bubbles[: order - 1]


def _edge_trace_basis(order: int, s: FloatArray) -> list[FloatArray]:
    """Covariant tangential traces ``u . (p_b - p_a)`` of the edge layers."""
    derivatives = [np.ones_like(s), 4.0 - 8.0 * s, 4.0 * (-6.0 * s * s + 6.0 * s - 1.0)]
    return derivatives[: order + 1]


def _require(dofs: IntArray, block: BlockName) -> IntArray:
    if dofs.size and np.any(dofs < 0):
        raise InvalidProblemError(f"block {block!r} has no DOFs on the requested boundary edges")
    return dofs


def edge_constraint(space: EdgeSpace, block: BlockName, edges: IntArray, data: VectorData = None) -> Constraint:
    """Constrain the tangential trace on ``edges`` to that of the field ``data``.

    Edge DOFs are the L2 projection of the covariant trace onto the edge
    layers; the lowest-order DOF is the circulation of ``data`` along the
    edge, oriented from the lower to the higher vertex index.
    """
    edges = np.asarray(edges, dtype=np.int64)
    func = _vector_field(data)
    s, w = line_quadrature(8)
    pa = space.mesh.vertices[space.mesh.edges[edges, 0]]
    pb = space.mesh.vertices[space.mesh.edges[edges, 1]]
    step = pb - pa
    points = pa[:, None, :] + s[None, :, None] * step[:, None, :]
    h = np.asarray(func(points.reshape(-1, 2)), dtype=np.complex128).reshape(len(edges), s.size, 2)
    g = np.einsum("eqd,ed->eq", h, step)
    psi = np.array(_edge_trace_basis(space.order, s))
    gram = (psi * w) @ psi.T
    coefficients = np.linalg.solve(gram, (psi * w) @ g.T)
    dofs = [_require(space.entity_dofs("edge", layer, edges), block) for layer in range(space.order + 1)]
    return Constraint(block, np.concatenate(dofs), coefficients.reshape(-1))


def nodal_constraint(space: ScalarSpace, block: BlockName, edges: IntArray, data: ScalarData = None) -> Constraint:
    """Constrain the trace of a scalar block on ``edges`` to ``data``."""
    edges = np.asarray(edges, dtype=np.int64)
    func = _scalar_field(data)
    vertices = np.unique(space.mesh.edges[edges])
    vertex_values = np.asarray(func(space.mesh.vertices[vertices]), dtype=np.complex128)
    dofs = [_require(space.entity_dofs("vertex", 0, vertices), block)]
    values = [vertex_values]
    if space.order > 1 and edges.size:
        s, w = line_quadrature(8)
        a, b = space.mesh.edges[edges, 0], space.mesh.edges[edges, 1]
        pa, pb = space.mesh.vertices[a], space.mesh.vertices[b]
        points = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
        g = np.asarray(func(points.reshape(-1, 2)), dtype=np.complex128).reshape(len(edges), s.size)
        ga = np.asarray(func(pa), dtype=np.complex128)
        gb = np.asarray(func(pb), dtype=np.complex128)
        remainder = g - (1.0 - s)[None, :] * ga[:, None] - s[None, :] * gb[:, None]
        bubbles = np.array(_edge_bubble_traces(space.order, s))
        gram = (bubbles * w) @ bubbles.T
        coefficients = np.linalg.solve(gram, (bubbles * w) @ remainder.T)
        for layer in range(space.order - 1):
            dofs.append(_require(space.entity_dofs("edge", layer, edges), block))
            values.append(coefficients[layer])
    return Constraint(block, np.concatenate(dofs), np.concatenate(values))


def pin_constraint(space: Space, block: BlockName, value: complex = 0.0) -> Constraint:
    """Fix the first DOF of a block whose field enters only through its gradient."""
    return Constraint(block, np.array([0], dtype=np.int64), np.array([value], dtype=np.complex128))


def essential_from_tags(
    spaces: Mapping[BlockName, Space],
    table: Mapping[BoundaryTag, Sequence[tuple[BlockName, VectorData | ScalarData]]],
) -> list[Constraint]:
    """Constraints for ``tag -> [(block, data), ...]``."""
    mesh = _common_mesh(spaces)
    constraints = []
    for tag, entries in table.items():
        if tag not in mesh.tags:
            raise InvalidProblemError(f"boundary tag {tag.value!r} does not occur in the mesh")
        edges = mesh.tagged_edges(tag)
        for block, data in entries:
            space = _space(spaces, block)
            if isinstance(space, EdgeSpace):
                constraints.append(edge_constraint(space, block, edges, data))  # type: ignore[arg-type]
            else:
                constraints.append(nodal_constraint(space, block, edges, data))  # type: ignore[arg-type,arg-type]
    return constraints


def apply_essential(system: BlockSystem, constraints: Iterable[Constraint]) -> BlockSystem:
    """Eliminate constrained DOFs symmetrically.

    The system keeps its size: constrained rows and columns become unit
    rows with the prescribed value on the right-hand side, and the known
    values are moved to the right-hand side of the free rows. Constraints
    of an already constrained system are merged; later ones win.
    """
    base = system.original or system
    indices = [system.constrained] if system.original is not None else []
    values = [system.values] if system.original is not None else []
    for constraint in constraints:
        offset, size = base.layout.get(constraint.block, (None, 0))  # type: ignore[assignment]
        if offset is None:
            raise InvalidProblemError(f"constraint on unknown block {constraint.block!r}")
        if constraint.dofs.size and (constraint.dofs.min() < 0 or constraint.dofs.max() >= size):
            raise InvalidProblemError(f"constraint outside block {constraint.block!r}")
        indices.append(offset + constraint.dofs)
        values.append(np.asarray(constraint.values, dtype=np.complex128))
    if not indices:
        return system
    all_idx = np.concatenate(indices)
    all_val = np.concatenate(values)
    # last assignment wins for repeated DOFs
    order = np.arange(all_idx.size)[::-1]
    unique_idx, first = np.unique(all_idx[order], return_index=True)
    unique_val = all_val[order][first]

    n = base.size
    known = np.zeros(n, dtype=np.complex128)
    known[unique_idx] = unique_val
    free = np.ones(n, dtype=bool)
    free[unique_idx] = False
    keep = sparse.diags(free.astype(np.float64))
    matrix = (keep @ base.matrix @ keep + sparse.diags((~free).astype(np.float64))).tocsr()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    rhs = np.where(free, base.rhs - base.matrix @ known, known)
    logger.debug("eliminated %d of %d dofs", unique_idx.size, n)
    return BlockSystem(base.spaces, matrix, rhs, unique_idx, unique_val, base)
