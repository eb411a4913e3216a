"""Tagged triangular meshes of the machine cross-section.

The mesh lives in the xy-plane. Triangles carry a region id, boundary edges
carry a :class:`~lamstack._types.BoundaryTag` and a free-form sub-label used
for diagnostics (``left``, ``inner``, ``symmetry_iron`` ...).

Edges are enumerated globally with the lower vertex index first. Every
element also has a *sorted* vertex order (ascending global index); all
local edges and higher-order basis functions are defined in that order, so
orientation agreement across elements holds without sign bookkeeping.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.spatial import Delaunay

from ._errors import InvalidArgumentError, MeshError, MeshParseError
from ._types import (
    BoundaryTag,
    ComplexArray,
    FloatArray,
    IntArray,
    RegionId,
    RegionKind,
)
from .excitation import ConductorSpec, check_conductors
from .microshape import LaminationSpec

logger = logging.getLogger(__name__)

# local edges of a triangle in sorted vertex order
LOCAL_EDGES: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))

RECT_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class RegionSpec:
    """Material data of one region of the cross-section."""

    id: RegionId
    kind: RegionKind
    sigma: float = 0.0
    mu_r: float = 1.0
    lamination: LaminationSpec | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("laminated", "air", "conductor"):
            raise InvalidArgumentError(
                f"region {self.id}: kind must be laminated, air or conductor,"
                f" got {self.kind!r}"
            )
        if self.sigma < 0:
            raise InvalidArgumentError(f"region {self.id}: sigma must be >= 0")
        if self.mu_r <= 0:
            raise InvalidArgumentError(f"region {self.id}: mu_r must be > 0")
        if self.kind == "laminated" and self.lamination is None:
            raise InvalidArgumentError(
                f"region {self.id}: laminated regions need a LaminationSpec"
            )

    @property
    def is_laminated(self) -> bool:
        return self.kind == "laminated"

    @property
    def rho(self) -> float:
        return math.inf if self.sigma == 0 else 1.0 / self.sigma


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: FloatArray
    triangles: IntArray
    regions: IntArray
    boundary_edges: IntArray
    boundary_tags: tuple[BoundaryTag, ...]
    boundary_labels: tuple[str, ...] = ()
    # interior edges carrying a tag, e.g. gamma_j on iron facing the air gap
    interface_edges: IntArray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    interface_tags: tuple[BoundaryTag, ...] = ()

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 2)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        regions = np.array(self.regions, dtype=np.int64).reshape(-1)
        boundary = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        if regions.shape[0] != triangles.shape[0]:
            raise MeshError("one region id per triangle required")
        if len(self.boundary_tags) != boundary.shape[0]:
            raise MeshError("one boundary tag per boundary edge required")
        labels = self.boundary_labels or ("",) * boundary.shape[0]
        if len(labels) != boundary.shape[0]:
            raise MeshError("one label per boundary edge required")
        interface = np.array(self.interface_edges, dtype=np.int64).reshape(-1, 2)
        if len(self.interface_tags) != interface.shape[0]:
            raise MeshError("one tag per interface edge required")
        if triangles.size and (
            triangles.min() < 0 or triangles.max() >= vertices.shape[0]
        ):
            raise MeshError("triangle references a vertex that does not exist")
        for array in (vertices, triangles, regions, boundary, interface):
            array.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "boundary_edges", boundary)
        object.__setattr__(
            self, "boundary_tags", tuple(BoundaryTag.parse(t) for t in self.boundary_tags)
        )
        object.__setattr__(self, "boundary_labels", tuple(labels))
        object.__setattr__(self, "interface_edges", interface)
        object.__setattr__(
            self, "interface_tags", tuple(BoundaryTag.parse(t) for t in self.interface_tags)
        )

    def __repr__(self) -> str:
        return (
            f"<Mesh2D V={self.num_vertices} E={self.num_edges}"
            f" F={self.num_triangles}>"
        )

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def sorted_triangles(self) -> IntArray:
        return np.sort(self.triangles, axis=1)

    @cached_property
    def _edge_tables(self) -> tuple[IntArray, IntArray]:
        st = self.sorted_triangles
        local = np.stack([st[:, [a, b]] for a, b in LOCAL_EDGES], axis=1)
        edges, inverse = np.unique(local.reshape(-1, 2), axis=0, return_inverse=True)
        return edges.astype(np.int64), inverse.reshape(-1, 3).astype(np.int64)

    @property
    def edges(self) -> IntArray:
        """Global edges ``(E, 2)``, lower vertex index first, lexicographic."""
        return self._edge_tables[0]

    @property
    def triangle_edges(self) -> IntArray:
        """Global edge ids ``(F, 3)`` of the sorted-order local edges."""
        return self._edge_tables[1]

    @cached_property
    def orientation(self) -> IntArray:
        """Sign ``(F, 3)`` of each local edge as traversed counter-clockwise."""
        tri = self.triangles
        ccw = np.stack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1)
        st = self.sorted_triangles
        signs = np.empty((self.num_triangles, 3), dtype=np.int64)
        for j, (a, b) in enumerate(LOCAL_EDGES):
            lo, hi = st[:, a], st[:, b]
            forward = np.any((ccw[:, :, 0] == lo[:, None]) & (ccw[:, :, 1] == hi[:, None]), axis=1)
            signs[:, j] = np.where(forward, 1, -1)
        return signs

    @cached_property
    def signed_areas(self) -> FloatArray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edge_triangle_count(self) -> IntArray:
        return np.bincount(self.triangle_edges.ravel(), minlength=self.num_edges)

    def edge_ids(self, pairs: IntArray) -> IntArray:
        """Global ids of the edges given as vertex pairs (any order)."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        n = self.num_vertices
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        wanted = pairs[:, 0] * n + pairs[:, 1]
        pos = np.searchsorted(keys, wanted)
        pos = np.minimum(pos, keys.size - 1)
        if not np.all(keys[pos] == wanted):
            raise MeshError("vertex pair is not an edge of the mesh")
        return pos.astype(np.int64)

    @cached_property
    def boundary_edge_ids(self) -> IntArray:
        return self.edge_ids(self.boundary_edges)

    @cached_property
    def interface_edge_ids(self) -> IntArray:
        return self.edge_ids(self.interface_edges)

    @property
    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_triangles

    @property
    def region_ids(self) -> tuple[RegionId, ...]:
        return tuple(RegionId(int(r)) for r in np.unique(self.regions))

    @property
    def tags(self) -> frozenset[BoundaryTag]:
        return frozenset(self.boundary_tags) | frozenset(self.interface_tags)

    def tagged_edges(self, tag: BoundaryTag) -> IntArray:
        """Global edge ids carrying ``tag``, boundary edges first."""
        outer = np.array([t is tag for t in self.boundary_tags], dtype=bool)
        inner = np.array([t is tag for t in self.interface_tags], dtype=bool)
        return np.concatenate([self.boundary_edge_ids[outer], self.interface_edge_ids[inner]])

    def support_triangles(self, regions: Sequence[int] | None) -> IntArray:
        """Indices of the triangles in ``regions`` (all when ``None``)."""
        if regions is None:
            return np.arange(self.num_triangles, dtype=np.int64)
        return np.flatnonzero(np.isin(self.regions, np.asarray(list(regions))))

    def support_boundary_edges(self, regions: Sequence[int] | None) -> IntArray:
        """Edges on the boundary of the union of ``regions``.

        This includes outer boundary edges and interfaces to other regions.
        """
        tris = self.support_triangles(regions)
        counts = np.bincount(
            self.triangle_edges[tris].ravel(), minlength=self.num_edges
        )
        return np.flatnonzero(counts == 1).astype(np.int64)

    def locate(self, points: FloatArray, tol: float = 1e-12) -> IntArray:
        """Triangle index containing each point, ``-1`` when outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        p = self.vertices[self.triangles]
        result = np.full(pts.shape[0], -1, dtype=np.int64)
        for k, q in enumerate(pts):
            lam = barycentric(p, q)
            inside = np.flatnonzero(np.all(lam >= -tol, axis=1))
            if inside.size:
                result[k] = inside[0]
        return result

    def check(self, *, holes: int | None = None) -> None:
        """Raise :class:`MeshError` unless all topology invariants hold."""
        if np.any(self.signed_areas <= 0):
            bad = int(np.flatnonzero(self.signed_areas <= 0)[0])
            raise MeshError(f"triangle {bad} is not counter-clockwise")
        counts = self.edge_triangle_count
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        outer = set(np.flatnonzero(counts == 1).tolist())
        tagged = self.boundary_edge_ids.tolist()
        if len(set(tagged)) != len(tagged):
            raise MeshError("a boundary edge is tagged twice")
        if set(tagged) != outer:
            missing = len(outer - set(tagged))
            raise MeshError(f"{missing} boundary edges are untagged or not on the boundary")
        if self.interface_edges.size and np.any(counts[self.interface_edge_ids] != 2):
            raise MeshError("an interface edge is not shared by two triangles")
        if holes is not None and self.euler_characteristic != 1 - holes:
            raise MeshError(
                f"Euler characteristic {self.euler_characteristic}, expected {1 - holes}"
            )

    def content_hash(self) -> str:
        import hashlib

        digest = hashlib.sha256()
        for array in (self.vertices, self.triangles, self.regions, self.boundary_edges):
            digest.update(np.ascontiguousarray(array).tobytes())
        digest.update(",".join(t.value for t in self.boundary_tags).encode())
        if self.interface_tags:
            digest.update(np.ascontiguousarray(self.interface_edges).tobytes())
            digest.update(",".join(t.value for t in self.interface_tags).encode())
        return digest.hexdigest()


def barycentric(corners: FloatArray, point: FloatArray) -> FloatArray:
    """Barycentric coordinates ``(F, 3)`` of ``point`` in triangles ``(F, 3, 2)``."""
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    l1 = ((point[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (point[1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
    l2 = ((b[:, 0] - a[:, 0]) * (point[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (point[0] - a[:, 0])) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def make_rect_mesh(
    width: float,
    height: float,
    nx: int,
    ny: int,
    region: int = 0,
    tag_map: Mapping[str, BoundaryTag | str] | None = None,
    *,
    origin: tuple[float, float] = (0.0, 0.0),
    pattern: Literal["right", "mirror"] = "right",
) -> Mesh2D:
    """Structured mesh of ``[x0, x0+width] x [y0, y0+height]``.

    Each of the ``nx * ny`` rectangles is split along one diagonal. With
    ``pattern="mirror"`` the lower half of the rows uses the other diagonal
    so the mesh is mirror-symmetric about the horizontal centre line.
    Sides are ``bottom``, ``right``, ``top``, ``left``; untagged sides get
    ``gamma_h``.
    """
    if not (width > 0 and height > 0):
        raise InvalidArgumentError("width and height must be positive")
    if nx < 1 or ny < 1:
        raise InvalidArgumentError("nx and ny must be at least 1")
    if pattern not in ("right", "mirror"):
        raise InvalidArgumentError(f"unknown diagonal pattern {pattern!r}")
    tag_map = dict(tag_map or {})
    unknown = set(tag_map) - set(RECT_SIDES)
    if unknown:
        raise InvalidArgumentError(
            f"unknown sides {sorted(unknown)}, expected {', '.join(RECT_SIDES)}"
        )
    tags = {side: BoundaryTag.parse(tag_map.get(side, BoundaryTag.GAMMA_H)) for side in RECT_SIDES}

    xs = origin[0] + width * np.arange(nx + 1) / nx
    ys = origin[1] + height * np.arange(ny + 1) / ny
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i: IntArray | int, j: IntArray | int) -> IntArray:
        return np.asarray(j) * (nx + 1) + np.asarray(i)

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    v00, v10, v01, v11 = vid(ii, jj), vid(ii + 1, jj), vid(ii, jj + 1), vid(ii + 1, jj + 1)
    anti = (jj >= ny / 2) if pattern == "mirror" else np.zeros_like(jj, dtype=bool)
    first = np.where(anti[:, None], np.column_stack([v00, v10, v01]), np.column_stack([v00, v10, v11]))
    second = np.where(anti[:, None], np.column_stack([v10, v11, v01]), np.column_stack([v00, v11, v01]))
    triangles = np.stack([first, second], axis=1).reshape(-1, 3)

    i = np.arange(nx)
    j = np.arange(ny)
    sides = {
        "bottom": np.column_stack([vid(i, 0), vid(i + 1, 0)]),
        "right": np.column_stack([vid(nx, j), vid(nx, j + 1)]),
        "top": np.column_stack([vid(i + 1, ny), vid(i, ny)]),
        "left": np.column_stack([vid(0, j + 1), vid(0, j)]),
    }
    boundary = np.concatenate([sides[s] for s in RECT_SIDES])
    tag_list: list[BoundaryTag] = []
    labels: list[str] = []
    for side in RECT_SIDES:
        tag_list += [tags[side]] * len(sides[side])
        labels += [side] * len(sides[side])

    return Mesh2D(
        vertices=vertices,
        triangles=triangles,
        regions=np.full(triangles.shape[0], region),
        boundary_edges=boundary,
        boundary_tags=tuple(tag_list),
        boundary_labels=tuple(labels),
    )


# region ids used by make_segment_mesh; conductors follow from CONDUCTOR_REGION_BASE
ROTOR_REGION = RegionId(0)
GAP_REGION = RegionId(1)
STATOR_REGION = RegionId(2)
CONDUCTOR_REGION_BASE = 3


@dataclass(frozen=True)
class SegmentGeometry:
    """Parametric annular segment of a fictitious machine.

    Radii in metres, angles in degrees. The defaults are invented plumbing
    and are not the dimensions of any published machine.

    ``conductors`` holds ``(r, theta_deg, current)`` triples; the default
    pair sits in the stator, mirrored about the symmetry plane at
    ``theta = 0`` with opposite currents.
    """

    r_rotor_in: float = 0.015
    r_rotor_out: float = 0.030
    r_stator_in: float = 0.031
    r_stator_out: float = 0.045
    angular_span: float = 30.0
    conductor_radius: float = 0.002
    conductors: tuple[tuple[float, float, complex], ...] = (
        (0.034, 7.5, 100.0),
        (0.034, -7.5, -100.0),
    )
    n_radial_rotor: int = 20
    n_radial_gap: int = 2
    n_radial_stator: int = 20
    n_angular: int = 48
    full_segment: bool = False
    tag_overrides: Mapping[str, BoundaryTag] = field(default_factory=dict)

    def __post_init__(self) -> None:
        radii = (self.r_rotor_in, self.r_rotor_out, self.r_stator_in, self.r_stator_out)
        if not (0 < radii[0] < radii[1] < radii[2] < radii[3]):
            raise InvalidArgumentError(
                "radii must satisfy 0 < r_rotor_in < r_rotor_out < r_stator_in < r_stator_out"
            )
        if not 0 < self.angular_span <= 180:
            raise InvalidArgumentError("angular_span must be in (0, 180] degrees")
        if self.conductor_radius <= 0:
            raise InvalidArgumentError("conductor_radius must be positive")
        for count in (self.n_radial_rotor, self.n_radial_gap, self.n_radial_stator, self.n_angular):
            if count < 1:
                raise InvalidArgumentError("subdivision counts must be at least 1")
        check_conductors(self.conductor_specs())
        for k, (r, _theta, _current) in enumerate(self.conductors):
            low, high = r - self.conductor_radius, r + self.conductor_radius
            in_rotor = radii[0] < low and high < radii[1]
            in_stator = radii[2] < low and high < radii[3]
            in_gap = radii[1] < low and high < radii[2]
            if not (in_rotor or in_stator or in_gap):
                raise InvalidArgumentError(f"conductor {k} crosses a region interface")

    @property
    def theta_range(self) -> tuple[float, float]:
        """Meshed angular range in radians."""
        half = math.radians(self.angular_span) / 2
        return (-half, half) if self.full_segment else (0.0, half)

    def conductor_specs(self) -> list[ConductorSpec]:
        return [
            ConductorSpec(
                center=(r * math.cos(math.radians(t)), r * math.sin(math.radians(t))),
                radius=self.conductor_radius,
                current=complex(current),
            )
            for r, t, current in self.conductors
        ]

    def regions(
        self, lamination: LaminationSpec, sigma: float, mu_r: float
    ) -> dict[RegionId, RegionSpec]:
        """Region table matching the ids produced by :func:`make_segment_mesh`."""
        table = {
            ROTOR_REGION: RegionSpec(ROTOR_REGION, "laminated", sigma, mu_r, lamination),
            GAP_REGION: RegionSpec(GAP_REGION, "air"),
            STATOR_REGION: RegionSpec(STATOR_REGION, "laminated", sigma, mu_r, lamination),
        }
        for k in range(len(self.conductors)):
            rid = RegionId(CONDUCTOR_REGION_BASE + k)
            table[rid] = RegionSpec(rid, "conductor")
        return table


def _ring_radii(geo: SegmentGeometry) -> FloatArray:
    rings = [
        np.linspace(geo.r_rotor_in, geo.r_rotor_out, geo.n_radial_rotor + 1),
        np.linspace(geo.r_rotor_out, geo.r_stator_in, geo.n_radial_gap + 1),
        np.linspace(geo.r_stator_in, geo.r_stator_out, geo.n_radial_stator + 1),
    ]
    return np.unique(np.concatenate(rings))


def make_segment_mesh(geo: SegmentGeometry) -> Mesh2D:
    """Mesh of the annular machine segment.

    Points are laid out on concentric arcs (region interfaces are arcs of
    points) plus circles around each conductor, then triangulated by
    Delaunay; triangles inside the bore are discarded and the rest are
    classified by centroid.

    Boundary tags: the cut at the largest angle is ``gamma_h``; the cut at
    ``theta = 0`` is the symmetry plane, ``gamma_e`` on iron and ``gamma_b``
    on air; inner and outer arcs are ``gamma_b``. With ``full_segment`` both
    cuts are ``gamma_h``. Iron edges facing the air gap are interface edges
    tagged ``gamma_j`` (sub-label ``gap``). Tags can be overridden per
    sub-label.
    """
    t0, t1 = geo.theta_range
    r_mid_gap = 0.5 * (geo.r_rotor_out + geo.r_stator_in)
    h = r_mid_gap * math.radians(geo.angular_span) / geo.n_angular

    points: list[FloatArray] = []
    for r in _ring_radii(geo):
        n = max(2, math.ceil((t1 - t0) * r / h))
        theta = np.linspace(t0, t1, n + 1)
        points.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    cloud = np.concatenate(points)

    conductors = []
    for k, spec in enumerate(geo.conductor_specs()):
        cx, cy = spec.center
        theta_c = math.atan2(cy, cx)
        margin = math.asin(min(1.0, spec.radius / math.hypot(cx, cy)))
        if theta_c + margin <= t0 or theta_c - margin >= t1:
            continue
        if theta_c - margin < t0 or theta_c + margin > t1:
            raise InvalidArgumentError(f"conductor {k} crosses a radial cut")
        conductors.append((k, spec))
        dist = np.hypot(cloud[:, 0] - cx, cloud[:, 1] - cy)
        cloud = cloud[np.abs(dist - spec.radius) >= 0.6 * h]
        n = max(8, math.ceil(2 * math.pi * spec.radius / h))
        phi = 2 * math.pi * np.arange(n) / n
        ring = np.column_stack([cx + spec.radius * np.cos(phi), cy + spec.radius * np.sin(phi)])
        cloud = np.concatenate([cloud, ring])

    simplices = Delaunay(cloud).simplices.astype(np.int64)
    corners = cloud[simplices]
    centroids = corners.mean(axis=1)
    radius = np.hypot(centroids[:, 0], centroids[:, 1])
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    keep = (radius > geo.r_rotor_in) & (np.abs(area) > 1e-10 * h * h)
    simplices, area, centroids, radius = simplices[keep], area[keep], centroids[keep], radius[keep]
    simplices[area < 0] = simplices[area < 0][:, [0, 2, 1]]

    regions = np.where(
        radius < geo.r_rotor_out,
        ROTOR_REGION,
        np.where(radius < geo.r_stator_in, GAP_REGION, STATOR_REGION),
    )
    for k, spec in conductors:
        inside = np.hypot(centroids[:, 0] - spec.center[0], centroids[:, 1] - spec.center[1]) < spec.radius
        regions[inside] = CONDUCTOR_REGION_BASE + k

    used, triangles = np.unique(simplices, return_inverse=True)
    triangles = triangles.reshape(-1, 3)
    vertices = cloud[used]

    boundary, owners = _outer_edges(triangles)
    tags, labels = _segment_tags(geo, vertices, boundary, regions[owners])
    mesh = Mesh2D(
        vertices=vertices,
        triangles=triangles,
        regions=regions,
        boundary_edges=boundary,
        boundary_tags=tags,
        boundary_labels=labels,
    )
    gap_edges = _gap_interface(mesh)
    gap_tag = BoundaryTag.parse(geo.tag_overrides.get("gap", BoundaryTag.GAMMA_J))
    mesh = replace(mesh, interface_edges=mesh.edges[gap_edges], interface_tags=(gap_tag,) * len(gap_edges))
    logger.debug("segment mesh %r, %d conductors meshed", mesh, len(conductors))
    return mesh


def _outer_edges(triangles: IntArray) -> tuple[IntArray, IntArray]:
    """Counter-clockwise boundary edges and the triangle owning each."""
    directed = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    keys = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    single = counts[inverse.reshape(-1)] == 1
    return directed[single], np.flatnonzero(single) // 3


def _gap_interface(mesh: Mesh2D) -> IntArray:
    """Edges shared by an iron triangle and an air gap triangle."""
    iron = np.isin(mesh.regions, (ROTOR_REGION, STATOR_REGION))
    gap = mesh.regions == GAP_REGION
    on_iron = np.zeros(mesh.num_edges, dtype=bool)
    on_gap = np.zeros(mesh.num_edges, dtype=bool)
    on_iron[mesh.triangle_edges[iron].ravel()] = True
    on_gap[mesh.triangle_edges[gap].ravel()] = True
    return np.flatnonzero(on_iron & on_gap).astype(np.int64)


def _segment_tags(
    geo: SegmentGeometry,
    vertices: FloatArray,
    boundary: IntArray,
    owner_regions: IntArray,
) -> tuple[tuple[BoundaryTag, ...], tuple[str, ...]]:
    t0, t1 = geo.theta_range
    r = np.hypot(vertices[:, 0], vertices[:, 1])
    theta = np.arctan2(vertices[:, 1], vertices[:, 0])
    tags: list[BoundaryTag] = []
    labels: list[str] = []
    for (a, b), region in zip(boundary, owner_regions, strict=True):
        if abs(theta[a] - t1) < 1e-9 and abs(theta[b] - t1) < 1e-9:
            label, tag = "cut_max", BoundaryTag.GAMMA_H
        elif abs(theta[a] - t0) < 1e-9 and abs(theta[b] - t0) < 1e-9:
            if geo.full_segment:
                label, tag = "cut_min", BoundaryTag.GAMMA_H
            elif region in (ROTOR_REGION, STATOR_REGION):
                label, tag = "symmetry_iron", BoundaryTag.GAMMA_E
            else:
                label, tag = "symmetry_air", BoundaryTag.GAMMA_B
        elif abs(r[a] - geo.r_rotor_in) < 1e-9 * geo.r_rotor_in and abs(r[b] - geo.r_rotor_in) < 1e-9 * geo.r_rotor_in:
            label, tag = "inner", BoundaryTag.GAMMA_B
        elif abs(r[a] - geo.r_stator_out) < 1e-9 * geo.r_stator_out and abs(r[b] - geo.r_stator_out) < 1e-9 * geo.r_stator_out:
            label, tag = "outer", BoundaryTag.GAMMA_B
        else:
            raise MeshError(f"boundary edge ({a}, {b}) lies on no known boundary part")
        tags.append(BoundaryTag.parse(geo.tag_overrides.get(label, tag)))
        labels.append(label)
    return tuple(tags), tuple(labels)


# ---------------------------------------------------------------------------
# MSH 2.2 ASCII subset
# ---------------------------------------------------------------------------

_MSH_ELEMENT_NAMES = {
    1: "2-node line",
    2: "3-node triangle",
    3: "4-node quadrangle",
    4: "4-node tetrahedron",
    5: "8-node hexahedron",
    8: "3-node line",
    9: "6-node triangle",
    15: "1-node point",
}

DEFAULT_TAG_PHYSICAL_IDS: dict[BoundaryTag, int] = {
    BoundaryTag.GAMMA_H: 101,
    BoundaryTag.GAMMA_J: 102,
    BoundaryTag.GAMMA_B: 103,
    BoundaryTag.GAMMA_E: 104,
}


def default_physical_map(region_ids: Sequence[int]) -> dict[int, int | BoundaryTag]:
    """Physical id table matching :func:`write_msh` defaults."""
    table: dict[int, int | BoundaryTag] = {1 + int(r): int(r) for r in region_ids}
    table.update({pid: tag for tag, pid in DEFAULT_TAG_PHYSICAL_IDS.items()})
    return table


def read_msh(text: str, physical_map: Mapping[int, int | BoundaryTag | str]) -> Mesh2D:
    """Parse the supported subset of the MSH 2.2 ASCII format.

    Supported are ``$Nodes`` and ``$Elements`` with 2-node lines (boundary,
    type 1), 3-node triangles (type 2) and points (type 15, ignored). The
    first element tag is the physical id, translated through
    ``physical_map`` to a region id (triangles) or a boundary tag (lines).
    Lines on interior edges become interface edges. Node ids may be sparse;
    they are renumbered densely in increasing order.
    """
    lines = text.splitlines()
    cursor = 0

    def next_line() -> tuple[int, str]:
        nonlocal cursor
        while cursor < len(lines):
            cursor += 1
            stripped = lines[cursor - 1].strip()
            if stripped:
                return cursor, stripped
        raise MeshParseError("unexpected end of file", cursor)

    node_ids: list[int] = []
    coords: list[tuple[float, float]] = []
    raw_lines: list[tuple[int, int, int, int]] = []
    raw_triangles: list[tuple[int, int, int, int, int]] = []
    seen_nodes = False
    while cursor < len(lines):
        lineno, current = next_line() if cursor < len(lines) else (cursor, "")
        if current == "$MeshFormat":
            lineno, header = next_line()
            if not header.split()[0].startswith("2"):
                raise MeshParseError(f"unsupported format version {header.split()[0]}", lineno)
            lineno, end = next_line()
            if end != "$EndMeshFormat":
                raise MeshParseError("expected $EndMeshFormat", lineno)
        elif current == "$Nodes":
            seen_nodes = True
            lineno, count = next_line()
            for _ in range(_parse_int(count, lineno)):
                lineno, row = next_line()
                parts = row.split()
                if len(parts) < 3:
                    raise MeshParseError("node line needs an id and coordinates", lineno)
                node_ids.append(_parse_int(parts[0], lineno))
                coords.append((_parse_float(parts[1], lineno), _parse_float(parts[2], lineno)))
            lineno, end = next_line()
            if end != "$EndNodes":
                raise MeshParseError("expected $EndNodes", lineno)
        elif current == "$Elements":
            lineno, count = next_line()
            for _ in range(_parse_int(count, lineno)):
                lineno, row = next_line()
                parts = [_parse_int(p, lineno) for p in row.split()]
                if len(parts) < 3:
                    raise MeshParseError("truncated element line", lineno)
                etype, ntags = parts[1], parts[2]
                physical = parts[3] if ntags > 0 else 0
                nodes = parts[3 + ntags :]
                if etype == 15:
                    continue
                if etype == 1 and len(nodes) == 2:
                    raw_lines.append((lineno, physical, nodes[0], nodes[1]))
                elif etype == 2 and len(nodes) == 3:
                    raw_triangles.append((lineno, physical, nodes[0], nodes[1], nodes[2]))
                else:
                    name = _MSH_ELEMENT_NAMES.get(etype, "unknown element")
                    raise MeshParseError(f"unsupported element type {etype} ({name})", lineno)
            lineno, end = next_line()
            if end != "$EndElements":
                raise MeshParseError("expected $EndElements", lineno)
        elif current.startswith("$"):
            # skip unknown sections such as $PhysicalNames
            section = current[1:]
            while True:
                lineno, row = next_line()
                if row == f"$End{section}":
                    break
    if not seen_nodes:
        raise MeshParseError("no $Nodes section", None)

    order = np.argsort(np.asarray(node_ids), kind="stable")
    dense = {node_ids[k]: i for i, k in enumerate(order)}
    vertices = np.asarray(coords, dtype=np.float64)[order]

    def remap(node: int, lineno: int) -> int:
        try:
            return dense[node]
        except KeyError:
            raise MeshParseError(f"element references unknown node {node}", lineno) from None

    def lookup(physical: int, lineno: int) -> int | BoundaryTag | str:
        try:
            return physical_map[physical]
        except KeyError:
            raise MeshParseError(f"no mapping for physical id {physical}", lineno) from None

    triangles = []
    regions = []
    for lineno, physical, *nodes in raw_triangles:
        target = lookup(physical, lineno)
        if not isinstance(target, int) or isinstance(target, bool):
            raise MeshParseError(f"physical id {physical} of a triangle must map to a region", lineno)
        triangles.append([remap(n, lineno) for n in nodes])
        regions.append(target)
    tri = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    outer = _outer_keys(tri)
    boundary = []
    tags: list[BoundaryTag] = []
    labels: list[str] = []
    interface = []
    interface_tags: list[BoundaryTag] = []
    for lineno, physical, a, b in raw_lines:
        target = lookup(physical, lineno)
        if isinstance(target, int):
            raise MeshParseError(f"physical id {physical} of a line must map to a boundary tag", lineno)
        try:
            tag = BoundaryTag.parse(target)
        except ValueError as exc:
            raise MeshParseError(str(exc), lineno) from None
        pair = [remap(a, lineno), remap(b, lineno)]
        if tuple(sorted(pair)) in outer:
            boundary.append(pair)
            tags.append(tag)
            labels.append(f"physical:{physical}")
        else:
            interface.append(pair)
            interface_tags.append(tag)

    p = vertices[tri]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tri[area < 0] = tri[area < 0][:, [0, 2, 1]]
    return Mesh2D(
        vertices=vertices,
        triangles=tri,
        regions=np.asarray(regions, dtype=np.int64),
        boundary_edges=np.asarray(boundary, dtype=np.int64).reshape(-1, 2),
        boundary_tags=tuple(tags),
        boundary_labels=tuple(labels),
        interface_edges=np.asarray(interface, dtype=np.int64).reshape(-1, 2),
        interface_tags=tuple(interface_tags),
    )


def _outer_keys(triangles: IntArray) -> set[tuple[int, int]]:
    """Sorted vertex pairs of the edges owned by a single triangle."""
    pairs = np.sort(triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    keys, counts = np.unique(pairs, axis=0, return_counts=True)
    return {(int(a), int(b)) for a, b in keys[counts == 1]}


def _parse_int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise MeshParseError(f"expected an integer, got {token!r}", lineno) from None


def _parse_float(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise MeshParseError(f"expected a number, got {token!r}", lineno) from None


def write_msh(
    mesh: Mesh2D,
    *,
    region_offset: int = 1,
    tag_ids: Mapping[BoundaryTag, int] = DEFAULT_TAG_PHYSICAL_IDS,
) -> str:
    """Serialise ``mesh`` as MSH 2.2 ASCII with 1-based node ids."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.num_vertices)]
    out += [f"{i + 1} {x!r} {y!r} 0" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    lines = len(mesh.boundary_tags) + len(mesh.interface_tags)
    out += ["$EndNodes", "$Elements", str(lines + mesh.num_triangles)]
    number = 0
    tagged = zip(
        [*mesh.boundary_edges.tolist(), *mesh.interface_edges.tolist()],
        [*mesh.boundary_tags, *mesh.interface_tags],
        strict=True,
    )
    for (a, b), tag in tagged:
        number += 1
        pid = tag_ids[tag]
        out.append(f"{number} 1 2 {pid} {pid} {a + 1} {b + 1}")
    for (a, b, c), region in zip(mesh.triangles.tolist(), mesh.regions.tolist(), strict=True):
        number += 1
        pid = region + region_offset
        out.append(f"{number} 2 2 {pid} {pid} {a + 1} {b + 1} {c + 1}")
    out.append("$EndElements")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# legacy VTK
# ---------------------------------------------------------------------------

FieldData = Mapping[str, "FloatArray | ComplexArray"]


def write_vtk(
    mesh: Mesh2D,
    point_data: FieldData | None = None,
    cell_data: FieldData | None = None,
    *,
    title: str = "lamstack",
) -> str:
    """Legacy ASCII VTK unstructured grid of ``mesh`` with optional fields.

    Fields are scalars ``(n,)`` or in-plane/3D vectors ``(n, 2|3)``; complex
    fields are written as two arrays suffixed ``_re`` and ``_im``.
    """
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " "), "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.num_vertices} double")
    out += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    out.append(f"CELLS {mesh.num_triangles} {4 * mesh.num_triangles}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    out.append(f"CELL_TYPES {mesh.num_triangles}")
    out += ["5"] * mesh.num_triangles
    for header, data, count in (
        ("POINT_DATA", point_data, mesh.num_vertices),
        ("CELL_DATA", cell_data, mesh.num_triangles),
    ):
        if not data:
            continue
        out.append(f"{header} {count}")
        for name, values in data.items():
            out += _vtk_field(name, np.asarray(values), count)
    return "\n".join(out) + "\n"


def _vtk_field(name: str, values: FloatArray | ComplexArray, count: int) -> list[str]:
    if values.shape[0] != count:
        raise InvalidArgumentError(
            f"field {name!r} has {values.shape[0]} entries, expected {count}"
        )
    if values.ndim > 2 or (values.ndim == 2 and values.shape[1] not in (2, 3)):
        raise InvalidArgumentError(f"field {name!r} must be scalar or a 2/3-vector")
    if np.iscomplexobj(values):
        return _vtk_field(f"{name}_re", values.real, count) + _vtk_field(f"{name}_im", values.imag, count)
    key = name.replace(" ", "_")
    values = values.astype(np.float64)
    if values.ndim == 1:
        return [f"SCALARS {key} double 1", "LOOKUP_TABLE default"] + [repr(v) for v in values.tolist()]
    if values.shape[1] == 2:
        values = np.column_stack([values, np.zeros(count)])
    return [f"VECTORS {key} double"] + [f"{a!r} {b!r} {c!r}" for a, b, c in values.tolist()]
