"""The four 2D/1D multiscale eddy current formulations.

Every formulation writes the field of one lamination period as a sum of
2D finite element functions multiplied by fixed z-profiles::

    TMS1   T = T0 + phi2 T2 + H_BS
    TMS2   T = grad Phi0 + phi2 T2 + H_BS
    AMS1   A = phi1_0 grad u10 + phi1 A1 + grad(phi1 w1)
    AMS2   A = phi1_0 grad u10 + phi1 grad u1 + dphi1 w1 e_z

The value and curl of an ansatz are tabulated once as :class:`Component`
lists. Bilinear forms, losses and field reconstruction are all derived
from those lists, with the z-integrals taken from the micro-shape table.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import sparse

from ._errors import InvalidArgumentError, InvalidProblemError, LamstackError, SingularMatrixError, SolverError
from ._quadrature import default_degree, quadrature
from ._types import (
    MU0,
    BlockName,
    BoundaryTag,
    ComplexArray,
    ExcitationMode,
    FloatArray,
    IntArray,
    MethodId,
    RegionId,
)
from .excitation import ConductorSpec, biot_savart_H, check_conductors, j0_density
from .fem_core import (
    BlockSystem,
    BoundarySource,
    Constraint,
    EdgeSpace,
    Form,
    Operator,
    ScalarSpace,
    SourceForm,
    Space,
    VectorData,
    apply_essential,
    assemble,
    edge_constraint,
    element_geometry,
    nodal_constraint,
    pin_constraint,
)
from .linsolve import factorize, solve_augmented, solve_linear
from .mesh2d import Mesh2D, RegionSpec, SegmentGeometry, make_rect_mesh, make_segment_mesh
from .microshape import LaminationSpec, MicroShapeTable, Part, integral_table, profile_value

logger = logging.getLogger(__name__)

T0 = BlockName("T0")
T2 = BlockName("T2")
PHI0 = BlockName("Phi0")
U10 = BlockName("u10")
U1 = BlockName("u1")
A1 = BlockName("A1")
W1 = BlockName("w1")

DEFAULT_CURL_PENALTY = 0.0

# weight of the curl-free constraint on T0, relative to max(rho_iron)
AUGMENTATION = 1e5

ASource = Literal["by_parts", "direct"]
Axis = Literal["plane", "z"]


@dataclass(frozen=True)
class DiscretizationConfig:
    """Method, orders, frequency, boundary data and excitation of a solve.

    ``boundary`` maps a tag to the tangential trace of the applied field,
    either a constant in-plane vector or a callable of ``(n, 2)`` points.
    ``edge_effect=False`` drops the edge-effect term of the ansatz
    (``phi2 T2`` or the ``w1`` term).

    ``curl_free`` (TMS1 only) constrains ``curl T0`` to zero wherever the
    period holds non-conducting material: air, conductors, and laminated
    regions with ``d0 > 0``. ``curl_penalty`` adds the regularizing
    resistivity ``curl_penalty * max(rho_iron)`` to the non-conducting parts
    of the T-family; it is off by default.
    """

    method: MethodId
    edge_order: int = 1
    frequency: float = 50.0
    boundary: Mapping[BoundaryTag, VectorData] = field(default_factory=dict)
    excitation: ExcitationMode = ExcitationMode.BOUNDARY_ONLY
    w1_order: int | None = None
    a_source: ASource = "by_parts"
    curl_penalty: float = DEFAULT_CURL_PENALTY
    curl_free: bool = True
    edge_effect: bool = True
    quadrature_degree: int | None = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "method", MethodId.parse(self.method))
            object.__setattr__(self, "excitation", ExcitationMode(self.excitation))
        except ValueError as exc:
            raise InvalidProblemError(str(exc)) from None
        object.__setattr__(
            self, "boundary", {BoundaryTag.parse(tag): data for tag, data in self.boundary.items()}
        )
        if self.edge_order not in (0, 1, 2):
            raise InvalidArgumentError(f"edge_order must be 0, 1 or 2, got {self.edge_order}")
        if self.w1_order is not None and self.w1_order not in (1, 2, 3):
            raise InvalidArgumentError(f"w1_order must be 1, 2 or 3, got {self.w1_order}")
        if not self.frequency > 0:
            raise InvalidArgumentError(f"frequency must be positive, got {self.frequency}")
        if self.curl_penalty < 0:
            raise InvalidArgumentError(f"curl_penalty must be >= 0, got {self.curl_penalty}")
        if self.a_source not in ("by_parts", "direct"):
            raise InvalidArgumentError(f"a_source must be by_parts or direct, got {self.a_source!r}")
        allowed = (
            (ExcitationMode.BIOT_SAVART, ExcitationMode.BOUNDARY_ONLY)
            if self.method.is_t_family
            else (ExcitationMode.IMPRESSED_J0, ExcitationMode.BOUNDARY_ONLY)
        )
        if self.excitation not in allowed:
            raise InvalidProblemError(
                f"{self.method.value} cannot use {self.excitation.value!r} excitation,"
                f" expected one of: {', '.join(mode.value for mode in allowed)}"
            )

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def nodal_order(self) -> int:
        return self.edge_order + 1

    @property
    def w1_space_order(self) -> int:
        return self.w1_order if self.w1_order is not None else self.nodal_order


# ---------------------------------------------------------------------------
# ansatz tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    """``sign * profile(z) * op(block)`` along ``axis``.

    In-plane curl components are stored before the quarter turn
    ``v -> (-v_y, v_x)``, which is an isometry and drops out of every
    product of two curls.
    """

    block: BlockName
    op: Operator
    profile: str
    axis: Axis
    sign: float = 1.0


@dataclass(frozen=True)
class Ansatz:
    value: tuple[Component, ...]
    curl: tuple[Component, ...]
    edge_effect_block: BlockName

    @property
    def blocks(self) -> tuple[BlockName, ...]:
        seen: dict[BlockName, None] = {}
        for component in (*self.value, *self.curl):
            seen.setdefault(component.block, None)
        return tuple(seen)

    def without(self, block: BlockName) -> Ansatz:
        return Ansatz(
            value=tuple(c for c in self.value if c.block != block),
            curl=tuple(c for c in self.curl if c.block != block),
            edge_effect_block=self.edge_effect_block,
        )


ANSATZ: dict[MethodId, Ansatz] = {
    MethodId.TMS1: Ansatz(
        value=(
            Component(T0, "value", "one", "plane"),
            Component(T2, "value", "phi2", "plane"),
        ),
        curl=(
            Component(T0, "curl", "one", "z"),
            Component(T2, "value", "dphi2", "plane"),
            Component(T2, "curl", "phi2", "z"),
        ),
        edge_effect_block=T2,
    ),
    MethodId.TMS2: Ansatz(
        value=(
            Component(PHI0, "grad", "one", "plane"),
            Component(T2, "value", "phi2", "plane"),
        ),
        curl=(
            Component(T2, "value", "dphi2", "plane"),
            Component(T2, "curl", "phi2", "z"),
        ),
        edge_effect_block=T2,
    ),
    MethodId.AMS1: Ansatz(
        value=(
            Component(U10, "grad", "phi1_0", "plane"),
            Component(A1, "value", "phi1", "plane"),
            Component(W1, "grad", "phi1", "plane"),
            Component(W1, "value", "dphi1", "z"),
        ),
        curl=(
            Component(U10, "grad", "dphi1_0", "plane"),
            Component(A1, "value", "dphi1", "plane"),
            Component(A1, "curl", "phi1", "z"),
        ),
        edge_effect_block=W1,
    ),
    MethodId.AMS2: Ansatz(
        value=(
            Component(U10, "grad", "phi1_0", "plane"),
            Component(U1, "grad", "phi1", "plane"),
            Component(W1, "value", "dphi1", "z"),
        ),
        curl=(
            Component(U10, "grad", "dphi1_0", "plane"),
            Component(U1, "grad", "dphi1", "plane"),
            Component(W1, "grad", "dphi1", "plane", sign=-1.0),
        ),
        edge_effect_block=W1,
    ),
}

# blocks entering only through their gradient; pinned when unconstrained
GRADIENT_BLOCKS = frozenset({PHI0, U10, U1})

ESSENTIAL: dict[MethodId, dict[BoundaryTag, tuple[BlockName, ...]]] = {
    MethodId.TMS1: {BoundaryTag.GAMMA_H: (T0,)},
    MethodId.TMS2: {BoundaryTag.GAMMA_H: (PHI0,)},
    MethodId.AMS1: {BoundaryTag.GAMMA_H: (U10, A1), BoundaryTag.GAMMA_B: (A1,)},
    MethodId.AMS2: {BoundaryTag.GAMMA_H: (U10, U1, W1), BoundaryTag.GAMMA_B: (U10, U1, W1)},
}


def ansatz_for(config: DiscretizationConfig) -> Ansatz:
    ansatz = ANSATZ[config.method]
    return ansatz if config.edge_effect else ansatz.without(ansatz.edge_effect_block)


def rotate(v: ComplexArray) -> ComplexArray:
    """Quarter turn ``(v_x, v_y) -> (-v_y, v_x)``, i.e. ``e_z x v``."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# ---------------------------------------------------------------------------
# problem and spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiscaleProblem:
    """Mesh, materials, lamination, excitation and discretization of one solve."""

    mesh: Mesh2D
    regions: Mapping[RegionId, RegionSpec]
    lamination: LaminationSpec
    config: DiscretizationConfig
    conductors: tuple[ConductorSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "conductors", tuple(self.conductors))
        missing = sorted(set(self.mesh.region_ids) - set(self.regions))
        if missing:
            raise InvalidProblemError(f"mesh regions {missing} have no material data")
        if not self.laminated_ids:
            raise InvalidProblemError("the problem has no laminated region")
        for rid in self.laminated_ids:
            spec = self.regions[rid]
            if spec.lamination is not None and spec.lamination != self.lamination:
                raise InvalidProblemError(
                    f"region {rid} has lamination {spec.lamination}, the problem uses {self.lamination}"
                )
            if not spec.sigma > 0:
                raise InvalidProblemError(f"laminated region {rid} needs sigma > 0")
        check_conductors(self.conductors)
        if self.config.excitation is ExcitationMode.BOUNDARY_ONLY:
            if self.conductors:
                raise InvalidProblemError("conductors given but the excitation is boundary_only")
        elif not self.conductors:
            raise InvalidProblemError(f"{self.config.excitation.value} excitation needs conductors")
        unknown = sorted(tag.value for tag in set(self.config.boundary) - self.mesh.tags)
        if unknown:
            raise InvalidProblemError(f"boundary data for tags not in the mesh: {', '.join(unknown)}")

    @cached_property
    def laminated_ids(self) -> tuple[RegionId, ...]:
        return tuple(rid for rid in self.mesh.region_ids if self.regions[rid].is_laminated)

    @cached_property
    def table(self) -> MicroShapeTable:
        return integral_table(self.lamination)

    @property
    def p(self) -> float:
        return self.lamination.p

    @cached_property
    def rho_max(self) -> float:
        return max(self.regions[rid].rho for rid in self.laminated_ids)

    @cached_property
    def curl_free_regions(self) -> tuple[int, ...]:
        """Regions whose period holds non-conducting material.

        Laminated regions qualify only with insulation, ``d0 > 0``.
        """
        with_insulation = self.lamination.d0 > 0
        return tuple(
            int(rid)
            for rid in self.mesh.region_ids
            if with_insulation or not self.regions[rid].is_laminated
        )

    @property
    def gauged(self) -> bool:
        """Whether ``curl T0`` is constrained to zero on :attr:`curl_free_regions`."""
        config = self.config
        return config.method is MethodId.TMS1 and config.curl_free and bool(self.curl_free_regions)

    @property
    def gauge_weight(self) -> float:
        return AUGMENTATION * self.rho_max

    def with_config(self, **changes: object) -> MultiscaleProblem:
        return replace(self, config=replace(self.config, **changes))  # type: ignore[arg-type]


def build_spaces(
    mesh: Mesh2D, config: DiscretizationConfig, regions: Mapping[RegionId, RegionSpec]
) -> dict[BlockName, Space]:
    """Finite element spaces of the blocks of ``config.method``.

    Whole-domain blocks live on all triangles, the others on the laminated
    regions only. Nodal blocks use order ``k + 1``.
    """
    laminated = tuple(rid for rid in mesh.region_ids if regions[rid].is_laminated)
    if not laminated:
        raise InvalidProblemError("the problem has no laminated region")
    k = config.edge_order
    nodal = config.nodal_order
    factories: dict[BlockName, Callable[[], Space]] = {
        T0: lambda: EdgeSpace(mesh, k),
        T2: lambda: EdgeSpace(mesh, k, laminated),
        PHI0: lambda: ScalarSpace(mesh, nodal),
        U10: lambda: ScalarSpace(mesh, nodal),
        A1: lambda: EdgeSpace(mesh, k, laminated),
        U1: lambda: ScalarSpace(mesh, nodal, laminated),
        W1: lambda: ScalarSpace(mesh, config.w1_space_order, laminated),
    }
    spaces = {block: factories[block]() for block in ansatz_for(config).blocks}
    logger.debug(
        "%s spaces: %s", config.method.value, ", ".join(f"{b}={s.ndofs}" for b, s in spaces.items())
    )
    return spaces


# ---------------------------------------------------------------------------
# period-averaged forms
# ---------------------------------------------------------------------------


def _parts(spec: RegionSpec) -> tuple[Part, ...]:
    return ("iron", "insulation") if spec.is_laminated else ("air",)


def value_weights(problem: MultiscaleProblem, spec: RegionSpec) -> dict[Part, complex]:
    """``j omega mu`` (T-family) or ``j omega sigma`` (A-family) per part."""
    jw = 1j * problem.config.omega
    if problem.config.method.is_t_family:
        if spec.is_laminated:
            return {"iron": jw * MU0 * spec.mu_r, "insulation": jw * MU0}
        return {"air": jw * MU0 * spec.mu_r}
    if spec.is_laminated:
        return {"iron": jw * spec.sigma, "insulation": 0.0}
    return {"air": 0.0}


def curl_weights(problem: MultiscaleProblem, spec: RegionSpec) -> dict[Part, complex]:
    """``rho`` (T-family, ``rho_reg`` where non-conducting) or ``nu`` per part."""
    if problem.config.method.is_t_family:
        penalty = problem.config.curl_penalty * problem.rho_max
        if spec.is_laminated:
            return {"iron": spec.rho, "insulation": penalty}
        return {"air": penalty}
    if spec.is_laminated:
        return {"iron": 1.0 / (MU0 * spec.mu_r), "insulation": 1.0 / MU0}
    return {"air": 1.0 / (MU0 * spec.mu_r)}


def averaged_coefficient(
    table: MicroShapeTable, weights: Mapping[Part, complex], f: str, g: str = "one"
) -> complex:
    """``(1/p) sum_part w_part int_part f g dz``."""
    total = sum(w * table.integral(part, f, g) for part, w in weights.items() if w != 0)
    return complex(total) / table.spec.p


def _pair_form(
    a: Component, b: Component, coef: complex, spaces: Mapping[BlockName, Space], region: int
) -> Form:
    regions = (int(region),)
    ops = (a.op, b.op)
    if ops == ("grad", "grad"):
        return Form(a.block, b.block, "stiffness", coef, regions)
    if ops == ("curl", "curl"):
        return Form(a.block, b.block, "curlcurl", coef, regions)
    if ops == ("value", "value"):
        edge_a = isinstance(spaces[a.block], EdgeSpace)
        edge_b = isinstance(spaces[b.block], EdgeSpace)
        if edge_a and edge_b:
            return Form(a.block, b.block, "vecmass", coef, regions)
        if not (edge_a or edge_b):
            return Form(a.block, b.block, "mass", coef, regions)
    if ops == ("grad", "value") and isinstance(spaces[b.block], EdgeSpace):
        return Form(a.block, b.block, "mixed", coef, regions)
    if ops == ("value", "grad") and isinstance(spaces[a.block], EdgeSpace):
        return Form(b.block, a.block, "mixed", coef, regions)
    raise LamstackError(f"no form pairs {a.block}:{a.op} with {b.block}:{b.op}")


def _component_forms(
    components: Sequence[Component],
    weights: Mapping[Part, complex],
    table: MicroShapeTable,
    spaces: Mapping[BlockName, Space],
    region: int,
) -> Iterable[Form]:
    for axis in ("plane", "z"):
        group = [c for c in components if c.axis == axis and c.block in spaces]
        for i, a in enumerate(group):
            for b in group[i:]:
                coef = a.sign * b.sign * averaged_coefficient(table, weights, a.profile, b.profile)
                if coef == 0:
                    continue
                if a is not b and a.block == b.block:
                    if a.op != b.op:
                        raise LamstackError(f"block {a.block} pairs two operators on one axis")
                    coef *= 2.0
                yield _pair_form(a, b, coef, spaces, region)


def msfem_forms(problem: MultiscaleProblem, spaces: Mapping[BlockName, Space]) -> list[Form]:
    """Bilinear forms of the period-averaged weak formulation, per region."""
    ansatz = ansatz_for(problem.config)
    forms: list[Form] = []
    for rid in problem.mesh.region_ids:
        spec = problem.regions[rid]
        forms += _component_forms(ansatz.value, value_weights(problem, spec), problem.table, spaces, rid)
        forms += _component_forms(ansatz.curl, curl_weights(problem, spec), problem.table, spaces, rid)
    return forms


def msfem_sources(
    problem: MultiscaleProblem, spaces: Mapping[BlockName, Space]
) -> list[SourceForm | BoundarySource]:
    """Linear forms of the excitation and of natural boundary data."""
    config = problem.config
    ansatz = ansatz_for(config)
    table = problem.table
    sources: list[SourceForm | BoundarySource] = []
    conductors = problem.conductors

    def h_bs(points: FloatArray) -> ComplexArray:
        return biot_savart_H(conductors, points)

    def j0(points: FloatArray) -> ComplexArray:
        return j0_density(conductors, points)

    if config.excitation is ExcitationMode.BIOT_SAVART:
        # the source field is moved to the right-hand side
        for rid in problem.mesh.region_ids:
            spec = problem.regions[rid]
            weights = value_weights(problem, spec)
            for c in ansatz.value:
                coef = -c.sign * averaged_coefficient(table, weights, c.profile)
                if c.block in spaces and coef != 0:
                    sources.append(SourceForm(c.block, c.op, h_bs, coef, (int(rid),)))
            if spec.is_laminated:
                iron = {"iron": curl_weights(problem, spec)["iron"]}
                for c in ansatz.curl:
                    coef = -c.sign * averaged_coefficient(table, iron, c.profile)
                    if c.axis == "z" and c.block in spaces and coef != 0:
                        sources.append(SourceForm(c.block, c.op, j0, coef, (int(rid),)))
    elif config.excitation is ExcitationMode.IMPRESSED_J0:
        if config.a_source == "by_parts":
            # int H_BS . curl(v); curl(f grad v) = -f' rotgrad(v)
            for rid in problem.mesh.region_ids:
                parts = {part: 1.0 for part in _parts(problem.regions[rid])}
                for c in ansatz.curl:
                    if c.axis != "plane" or c.block not in spaces:
                        continue
                    coef = c.sign * averaged_coefficient(table, parts, c.profile)
                    if coef == 0:
                        continue
                    if c.op != "grad":
                        raise LamstackError(f"source term on {c.block}:{c.op} is not supported")
                    sources.append(SourceForm(c.block, "rotgrad", h_bs, -coef, (int(rid),)))
        else:
            air = averaged_coefficient(table, {"air": 1.0}, "dphi1_0")
            conducting = tuple(
                int(rid) for rid in problem.mesh.region_ids if problem.regions[rid].kind == "conductor"
            )
            if conducting:
                sources.append(SourceForm(U10, "value", j0, -air, conducting))

    if not config.method.is_t_family:
        for tag, data in config.boundary.items():
            sources.append(_trace_functional(table, tag, data))
    return sources


def _trace_functional(table: MicroShapeTable, tag: BoundaryTag, data: VectorData) -> BoundarySource:
    """``(2/p) int H_t v ds`` on ``u10`` for a tangential trace given on ``tag``."""
    if data is None:
        vec = np.zeros(2, dtype=np.complex128)
    elif not callable(data):
        vec = np.asarray(data, dtype=np.complex128)
        if vec.shape != (2,):
            raise InvalidProblemError(f"trace on {tag.value} needs two components")
    field_fn = data if callable(data) else None

    def trace(points: FloatArray, tangents: FloatArray) -> ComplexArray:
        h = field_fn(points) if field_fn is not None else np.broadcast_to(vec, points.shape)
        return np.einsum("nd,nd->n", np.asarray(h, dtype=np.complex128), tangents)

    coef = averaged_coefficient(table, {"iron": 1.0, "insulation": 1.0}, "dphi1_0")
    return BoundarySource(U10, (tag,), trace, coef)


def assemble_msfem(
    problem: MultiscaleProblem, spaces: Mapping[BlockName, Space] | None = None
) -> BlockSystem:
    """Assemble the unconstrained block system of ``problem``.

    For a gauged TMS1 problem the matrix carries the augmentation
    ``gauge_weight * G`` of :func:`curl_gauge`; :func:`solve` removes its
    effect on the solution.
    """
    if spaces is None:
        spaces = build_spaces(problem.mesh, problem.config, problem.regions)
    forms = msfem_forms(problem, spaces)
    system = assemble(
        forms, spaces, msfem_sources(problem, spaces), degree=problem.config.quadrature_degree
    )
    gauge = curl_gauge(problem, spaces)
    if gauge is not None:
        matrix = (system.matrix + problem.gauge_weight * gauge).tocsr()
        system = BlockSystem(system.spaces, matrix, system.rhs)
    elif problem.config.method is MethodId.TMS1 and problem.curl_free_regions and problem.config.curl_penalty == 0:
        logger.warning("TMS1 without the curl-free constraint: curl T0 is unconstrained in non-conducting material")
    logger.debug("%s: %d forms, %d dofs", problem.config.method.value, len(forms), system.size)
    return system


def curl_gauge(problem: MultiscaleProblem, spaces: Mapping[BlockName, Space]) -> sparse.csr_matrix | None:
    """``G = int curl T0 . curl v`` over the curl-free regions, full system size.

    ``G x = 0`` holds exactly when ``curl T0`` vanishes there. None unless
    the problem is gauged.
    """
    if not problem.gauged or T0 not in spaces:
        return None
    form = Form(T0, T0, "curlcurl", 1.0, problem.curl_free_regions)
    return assemble([form], spaces, degree=problem.config.quadrature_degree).matrix


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------


def _support_edges(space: Space, edges: IntArray) -> IntArray:
    touched = np.unique(space.mesh.triangle_edges[space.cells])
    return edges[np.isin(edges, touched)]


def _potential_data(tag: BoundaryTag, data: VectorData) -> complex | Callable[[FloatArray], ComplexArray] | None:
    """Scalar potential whose gradient has the constant trace ``data``."""
    if data is None:
        return None
    if callable(data):
        raise InvalidProblemError(
            f"TMS2 needs a constant trace on {tag.value}; a spatially varying trace has no scalar potential here"
        )
    vec = np.asarray(data, dtype=np.complex128)
    if vec.shape != (2,):
        raise InvalidProblemError(f"trace on {tag.value} needs two components")
    return lambda points: np.asarray(points, dtype=np.float64) @ vec


def boundary_constraints(
    spaces: Mapping[BlockName, Space], mesh: Mesh2D, config: DiscretizationConfig
) -> list[Constraint]:
    """Essential conditions of ``config.method`` for the tags present in ``mesh``."""
    t_family = config.method.is_t_family
    if t_family:
        natural = sorted(tag.value for tag in config.boundary if tag is not BoundaryTag.GAMMA_H)
        if natural:
            raise InvalidProblemError(
                f"{config.method.value} takes boundary data on gamma_h only, got: {', '.join(natural)}"
            )
    constraints: list[Constraint] = []
    for tag, blocks in ESSENTIAL[config.method].items():
        if tag not in mesh.tags:
            continue
        if not t_family and tag in config.boundary:
            logger.debug("%s: data on %s replaces its essential conditions", config.method.value, tag.value)
            continue
        edges = mesh.tagged_edges(tag)
        data = config.boundary.get(tag)
        for block in blocks:
            space = spaces.get(block)
            if space is None:
                continue
            on_support = _support_edges(space, edges)
            if on_support.size == 0:
                continue
            if isinstance(space, EdgeSpace):
                constraints.append(edge_constraint(space, block, on_support, data if block == T0 else None))
            elif block == PHI0:
                constraints.append(nodal_constraint(space, block, on_support, _potential_data(tag, data)))  # type: ignore[arg-type]
            else:
                constraints.append(nodal_constraint(space, block, on_support))  # type: ignore[arg-type]

    if T2 in spaces:
        t2 = spaces[T2]
        support_edges = mesh.support_boundary_edges(t2.regions)
        if BoundaryTag.GAMMA_E in mesh.tags:
            support_edges = np.setdiff1d(support_edges, mesh.tagged_edges(BoundaryTag.GAMMA_E))
        if support_edges.size:
            constraints.append(edge_constraint(t2, T2, support_edges))  # type: ignore[arg-type]

    constrained = {c.block for c in constraints if c.dofs.size}
    for block in spaces:
        if block in GRADIENT_BLOCKS and block not in constrained:
            logger.debug("pinning the first DOF of %s", block)
            constraints.append(pin_constraint(spaces[block], block))
    return constraints


def bc_apply(system: BlockSystem, mesh: Mesh2D, config: DiscretizationConfig) -> BlockSystem:
    """Eliminate the essential conditions of ``config.method``.

    The natural conditions of each table (tangential E on ``gamma_e``,
    normal flux or current elsewhere) need no treatment.
    """
    return apply_essential(system, boundary_constraints(system.spaces, mesh, config))


# ---------------------------------------------------------------------------
# solution, reconstruction and losses
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SolutionField:
    problem: MultiscaleProblem
    system: BlockSystem
    coefficients: ComplexArray
    residual: float
    factor_nnz: int
    t_assemble: float = 0.0
    t_solve: float = 0.0

    @property
    def config(self) -> DiscretizationConfig:
        return self.problem.config

    @property
    def lamination(self) -> LaminationSpec:
        return self.problem.lamination

    @property
    def spaces(self) -> Mapping[BlockName, Space]:
        return self.system.spaces

    @cached_property
    def blocks(self) -> dict[BlockName, ComplexArray]:
        return self.system.split(self.coefficients)


@dataclass(frozen=True)
class LossReport:
    """Eddy current losses of one lamination period [W] and solve statistics."""

    P: float
    P_EE: float
    dofs: int
    nnz: int
    t_assemble: float
    t_solve: float
    factor_nnz: int = 0

    def as_dict(self) -> dict[str, float | int]:
        return {
            "P": self.P,
            "P_EE": self.P_EE,
            "dofs": self.dofs,
            "nnz": self.nnz,
            "factor_nnz": self.factor_nnz,
            "t_assemble": self.t_assemble,
            "t_solve": self.t_solve,
        }

    def scaled(self, sheets: int) -> LossReport:
        """Losses of a stack of ``sheets`` identical periods."""
        if sheets < 1:
            raise InvalidArgumentError(f"stack needs at least one sheet, got {sheets}")
        return replace(self, P=self.P * sheets, P_EE=self.P_EE * sheets)


def solve(system: BlockSystem, problem: MultiscaleProblem, *, t_assemble: float = 0.0) -> SolutionField:
    """Factorize and solve a constrained system.

    A zero pivot is reported with the block it falls into. A gauged TMS1
    system is solved by the method of multipliers, which enforces
    ``curl T0 = 0`` to solver precision.
    """
    start = time.perf_counter()
    try:
        factors = factorize(system.matrix)
    except SingularMatrixError as exc:
        block = system.block_of(exc.index) if exc.index is not None else None
        raise SingularMatrixError(
            f"{problem.config.method.value} system is singular", exc.index, block
        ) from None
    gauge = curl_gauge(problem, system.spaces)
    if gauge is None:
        x = solve_linear(factors, system.rhs)
        residual = system.residual(x)
    else:
        free = np.ones(system.size, dtype=bool)
        free[system.constrained] = False
        result = solve_augmented(factors, system.rhs, gauge, gamma=problem.gauge_weight, free=free)
        x, residual = result.x, result.residual
    elapsed = time.perf_counter() - start
    if not np.all(np.isfinite(x)):
        raise SolverError(f"{problem.config.method.value} solution has non-finite entries")
    logger.debug("solved %d dofs in %.3fs, residual %.2e", system.size, elapsed, residual)
    return SolutionField(problem, system, x, residual, factors.nnz, t_assemble, elapsed)


def run(problem: MultiscaleProblem) -> tuple[SolutionField, LossReport]:
    """Assemble, constrain, solve and evaluate the losses of ``problem``."""
    start = time.perf_counter()
    system = bc_apply(assemble_msfem(problem), problem.mesh, problem.config)
    t_assemble = time.perf_counter() - start
    solution = solve(system, problem, t_assemble=t_assemble)
    return solution, losses(solution)


@dataclass(frozen=True)
class FieldSample:
    """Complex 3-vectors ``(..., 3)`` of B [T], H [A/m] and J [A/m^2]."""

    B: ComplexArray
    H: ComplexArray
    J: ComplexArray

    def as_dict(self) -> dict[str, ComplexArray]:
        return {"B": self.B, "H": self.H, "J": self.J}


def _part_at(spec: RegionSpec, lamination: LaminationSpec, z: float) -> Part:
    if not spec.is_laminated:
        return "air"
    return "iron" if abs(z) <= 0.5 * lamination.d else "insulation"


def _component_values(
    solution: SolutionField, component: Component, triangles: IntArray, lam: FloatArray
) -> ComplexArray:
    space = solution.spaces[component.block]
    values = space.evaluate_cells(solution.blocks[component.block], component.op, triangles, lam)
    return component.sign * values


def _combine(
    solution: SolutionField,
    components: Sequence[Component],
    triangles: IntArray,
    lam: FloatArray,
    profile: Callable[[str], FloatArray],
) -> tuple[ComplexArray, ComplexArray]:
    """Sum of components as ``(plane (n, 2), z (n,))`` with per-point profile values."""
    n = len(triangles)
    plane = np.zeros((n, 2), dtype=np.complex128)
    axial = np.zeros(n, dtype=np.complex128)
    for c in components:
        if c.block not in solution.spaces:
            continue
        values = _component_values(solution, c, triangles, lam)
        weight = profile(c.profile)
        if c.axis == "plane":
            plane += weight[:, None] * values
        else:
            axial += weight * values
    return plane, axial


def _fields(solution: SolutionField, triangles: IntArray, lam: FloatArray, z: FloatArray) -> FieldSample:
    """Fields at one barycentric point ``lam`` of each triangle, at heights ``z``."""
    problem = solution.problem
    mesh = problem.mesh
    lamination = problem.lamination
    specs = [problem.regions[RegionId(int(r))] for r in mesh.regions[triangles]]
    parts = [_part_at(spec, lamination, float(zk)) for spec, zk in zip(specs, z, strict=True)]

    def profile(name: str) -> FloatArray:
        return np.array(
            [profile_value(name, part, lamination, float(zk)) for part, zk in zip(parts, z, strict=True)]
        )

    mu = np.array(
        [MU0 * (1.0 if part == "insulation" else spec.mu_r) for spec, part in zip(specs, parts, strict=True)]
    )
    sigma = np.array([spec.sigma if part == "iron" else 0.0 for spec, part in zip(specs, parts, strict=True)])
    conducting = np.array([spec.kind == "conductor" for spec in specs])
    ansatz = ansatz_for(solution.config)
    geo = element_geometry(mesh)
    points = np.einsum("i,cid->cd", lam, geo.corners[triangles])

    j = np.zeros((len(triangles), 3), dtype=np.complex128)
    if solution.config.method.is_t_family:
        h_plane, _ = _combine(solution, ansatz.value, triangles, lam, profile)
        c_plane, c_z = _combine(solution, ansatz.curl, triangles, lam, profile)
        if problem.conductors:
            h_plane = h_plane + biot_savart_H(problem.conductors, points)
            c_z = c_z + np.where(conducting, j0_density(problem.conductors, points), 0.0)
        h = np.column_stack([h_plane, np.zeros(len(triangles))])
        j[:, :2] = rotate(c_plane)
        j[:, 2] = c_z
        b = mu[:, None] * h
    else:
        b_plane, b_z = _combine(solution, ansatz.curl, triangles, lam, profile)
        a_plane, a_z = _combine(solution, ansatz.value, triangles, lam, profile)
        b = np.column_stack([rotate(b_plane), b_z])
        h = b / mu[:, None]
        jw = 1j * solution.config.omega
        j[:, :2] = -jw * sigma[:, None] * a_plane
        j[:, 2] = -jw * sigma * a_z
        if problem.conductors:
            j[:, 2] += np.where(conducting, j0_density(problem.conductors, points), 0.0)
    return FieldSample(B=b, H=h, J=j)


def reconstruct(
    solution: SolutionField,
    x: float | FloatArray,
    y: float | FloatArray,
    z: float | FloatArray,
) -> FieldSample:
    """3D fields at ``(x, y)`` in the cross-section and ``z`` within the period.

    Arguments broadcast; the result has shape ``(*broadcast, 3)``.
    """
    xb, yb, zb = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
    if np.any(np.abs(zb) > 0.5 * solution.lamination.p * (1 + 1e-12)):
        raise InvalidArgumentError(f"z must lie within the period |z| <= {0.5 * solution.lamination.p}")
    shape = xb.shape
    points = np.column_stack([xb.ravel(), yb.ravel()])
    space = next(iter(solution.spaces.values()))
    triangles, lams = space.locate(points)
    samples = [
        _fields(solution, triangles[k : k + 1], lams[k], zb.ravel()[k : k + 1]) for k in range(len(triangles))
    ]
    return FieldSample(
        *(np.concatenate([getattr(s, name) for s in samples]).reshape(*shape, 3) for name in ("B", "H", "J"))
    )


def sample_slice(solution: SolutionField, z: float) -> dict[str, ComplexArray]:
    """Cell-centred ``B``, ``H`` and ``J`` of all triangles at height ``z``."""
    if abs(z) > 0.5 * solution.lamination.p * (1 + 1e-12):
        raise InvalidArgumentError(f"z must lie within the period |z| <= {0.5 * solution.lamination.p}")
    mesh = solution.problem.mesh
    triangles = np.arange(mesh.num_triangles)
    centroid = np.full(3, 1.0 / 3.0)
    return _fields(solution, triangles, centroid, np.full(mesh.num_triangles, float(z))).as_dict()


def _loss_components(config: DiscretizationConfig) -> tuple[tuple[Component, ...], bool]:
    """Components of the current density and whether they are ``curl T``."""
    ansatz = ansatz_for(config)
    if config.method.is_t_family:
        return ansatz.curl, True
    return ansatz.value, False


def _density(group: Sequence[Component], values: Sequence[ComplexArray], table: MicroShapeTable) -> FloatArray:
    """``int_iron |sum_c profile_c(z) v_c|^2 dz`` at the quadrature points."""
    density = np.zeros(values[0].shape[:2]) if values else np.zeros(0)
    for i, (a, va) in enumerate(zip(group, values, strict=True)):
        for b, vb in zip(group[i:], values[i:], strict=True):
            integral = table.integral("iron", a.profile, b.profile)
            if integral == 0:
                continue
            product = va * np.conj(vb)
            if product.ndim == 3:
                product = product.sum(axis=-1)
            density += (1.0 if a is b else 2.0) * integral * product.real
    return density


def losses(solution: SolutionField) -> LossReport:
    """Period losses ``P = 1/2 int rho |J|^2`` over the iron and the edge-effect loss ``P_EE``.

    ``P_EE`` is the loss of the ``J_z`` carried by the edge-effect block
    (``T2`` or ``w1``); it is exactly zero when that block is dropped. The
    2D integral uses element quadrature; the z-integral comes from the
    micro-shape table.
    """
    problem = solution.problem
    mesh = problem.mesh
    table = problem.table
    geo = element_geometry(mesh)
    components, curl_form = _loss_components(solution.config)
    edge_block = ansatz_for(solution.config).edge_effect_block
    degree = default_degree(max(space.poly_degree for space in solution.spaces.values()))
    rule = quadrature(degree)
    omega = solution.config.omega
    total = {"plane": 0.0, "z": 0.0, "edge": 0.0}
    for rid in problem.laminated_ids:
        spec = problem.regions[rid]
        cells = np.flatnonzero(mesh.regions == rid)
        if cells.size == 0:
            continue
        # rho |J|^2 with J = curl T, or rho |j omega sigma A|^2 = omega^2 sigma |A|^2
        factor = spec.rho if curl_form else omega**2 * spec.sigma
        weights = rule.weights[None, :] * np.abs(geo.det[cells])[:, None]
        for axis in ("plane", "z"):
            group = [c for c in components if c.axis == axis and c.block in solution.spaces]
            values = []
            for c in group:
                space = solution.spaces[c.block]
                basis = space.tabulate(c.op, rule.barycentric, cells)
                coef = solution.blocks[c.block][space.dofmap[space.cell_index[cells]]]
                values.append(c.sign * np.einsum("cl,cql...->cq...", coef, basis))
            if not group:
                continue
            total[axis] += 0.5 * factor * float(np.sum(weights * _density(group, values, table)))
            if axis == "z":
                edge = [(c, v) for c, v in zip(group, values, strict=True) if c.block == edge_block]
                if edge:
                    density = _density([c for c, _ in edge], [v for _, v in edge], table)
                    total["edge"] += 0.5 * factor * float(np.sum(weights * density))
    p = max(total["plane"], 0.0) + max(total["z"], 0.0)
    report = LossReport(
        P=p,
        P_EE=min(max(total["edge"], 0.0), p),
        dofs=solution.system.size,
        nnz=(solution.system.original or solution.system).nnz,
        t_assemble=solution.t_assemble,
        t_solve=solution.t_solve,
        factor_nnz=solution.factor_nnz,
    )
    logger.debug("%s losses: P=%.6e W, P_EE=%.6e W", solution.config.method.value, report.P, report.P_EE)
    return report



# ---------------------------------------------------------------------------
# benchmark problems
# ---------------------------------------------------------------------------


def strip_problem(
    method: MethodId | str,
    *,
    width: float,
    height: float,
    lamination: LaminationSpec,
    sigma: float,
    mu_r: float,
    frequency: float,
    h0: complex,
    nx: int = 40,
    ny: int = 2,
    edge_order: int = 2,
    **options: object,
) -> MultiscaleProblem:
    """Laminated strip ``[0, width] x [0, height]`` driven by the trace ``h0 e_y``.

    Every side is ``gamma_h``; the field does not depend on y, so the loss
    divided by ``height`` is the loss per unit length of one sheet.
    """
    mesh = make_rect_mesh(width, height, nx, ny, region=0)
    regions = {RegionId(0): RegionSpec(RegionId(0), "laminated", sigma, mu_r, lamination)}
    config = DiscretizationConfig(
        method=MethodId.parse(method),
        edge_order=edge_order,
        frequency=frequency,
        boundary={BoundaryTag.GAMMA_H: (0.0, complex(h0))},
        **options,  # type: ignore[arg-type]
    )
    return MultiscaleProblem(mesh, regions, lamination, config)


def segment_excitation(method: MethodId | str) -> ExcitationMode:
    return ExcitationMode.BIOT_SAVART if MethodId.parse(method).is_t_family else ExcitationMode.IMPRESSED_J0


def segment_problem(
    geometry: SegmentGeometry,
    method: MethodId | str,
    *,
    lamination: LaminationSpec,
    sigma: float,
    mu_r: float,
    frequency: float,
    edge_order: int = 2,
    **options: object,
) -> MultiscaleProblem:
    """Machine segment excited by its conductors; Biot-Savart field for the
    T-family, impressed current density for the A-family."""
    config = DiscretizationConfig(
        method=MethodId.parse(method),
        edge_order=edge_order,
        frequency=frequency,
        excitation=segment_excitation(method),
        **options,  # type: ignore[arg-type]
    )
    return MultiscaleProblem(
        make_segment_mesh(geometry),
        geometry.regions(lamination, sigma, mu_r),
        lamination,
        config,
        tuple(geometry.conductor_specs()),
    )
