"""Tests for mesh construction, import and export."""

from __future__ import annotations

import math

import numpy as np
import pytest

from lamstack._errors import InvalidArgumentError, MeshError, MeshParseError
from lamstack._types import BoundaryTag
from lamstack.mesh2d import (
    CONDUCTOR_REGION_BASE,
    GAP_REGION,
    ROTOR_REGION,
    STATOR_REGION,
    Mesh2D,
    SegmentGeometry,
    default_physical_map,
    make_rect_mesh,
    make_segment_mesh,
    read_msh,
    write_msh,
    write_vtk,
)

UNIT_SQUARE_MSH = """\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 1 1 0
$EndNodes
$Elements
6
1 1 2 101 101 1 2
2 1 2 101 101 2 4
3 1 2 101 101 4 3
4 1 2 101 101 3 1
5 2 2 1 1 1 2 4
6 2 2 1 1 1 4 3
$EndElements
"""


def _vtk_points(text: str) -> np.ndarray:
    lines = text.splitlines()
    start = next(i for i, line in enumerate(lines) if line.startswith("POINTS"))
    count = int(lines[start].split()[1])
    return np.array([[float(v) for v in line.split()] for line in lines[start + 1 : start + 1 + count]])


class TestRectMesh:
    """Tests for the structured strip mesher."""

    def test_minimal_split(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 1, 1)

        assert (mesh.num_vertices, mesh.num_triangles, mesh.num_edges) == (4, 2, 5)

    def test_counts(self) -> None:
        mesh = make_rect_mesh(0.01, 0.001, 40, 4)

        assert mesh.num_vertices == 205
        assert mesh.num_triangles == 320

    @pytest.mark.parametrize("pattern", ["right", "mirror"])
    def test_area_partition(self, pattern: str) -> None:
        mesh = make_rect_mesh(0.01, 0.001, 7, 3, pattern=pattern)  # type: ignore[arg-type]

        assert np.all(mesh.signed_areas > 0)
        assert math.isclose(mesh.signed_areas.sum(), 1e-5, rel_tol=1e-12)

    def test_invariants(self) -> None:
        mesh = make_rect_mesh(2.0, 1.0, 5, 3)

        mesh.check(holes=0)
        assert mesh.euler_characteristic == 1

    def test_tag_map(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 2, 2, tag_map={"left": "gamma_b", "right": BoundaryTag.GAMMA_E})

        assert mesh.tags == {BoundaryTag.GAMMA_H, BoundaryTag.GAMMA_B, BoundaryTag.GAMMA_E}
        assert len(mesh.tagged_edges(BoundaryTag.GAMMA_B)) == 2
        assert len(mesh.tagged_edges(BoundaryTag.GAMMA_H)) == 4

    def test_mirror_pattern_is_symmetric(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 4, 4, origin=(0.0, -0.5), pattern="mirror")
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        mirrored = centroids * np.array([1.0, -1.0])

        key = np.round(centroids, 12)
        mirrored_key = np.round(mirrored, 12)
        assert {tuple(c) for c in key} == {tuple(c) for c in mirrored_key}

    @pytest.mark.parametrize(
        ("width", "height", "nx", "ny"),
        [(0.0, 1.0, 1, 1), (1.0, -1.0, 1, 1), (1.0, 1.0, 0, 1), (1.0, 1.0, 1, 0)],
    )
    def test_invalid(self, width: float, height: float, nx: int, ny: int) -> None:
        with pytest.raises(InvalidArgumentError):
            make_rect_mesh(width, height, nx, ny)

    def test_unknown_side(self) -> None:
        with pytest.raises(InvalidArgumentError, match="unknown sides"):
            make_rect_mesh(1.0, 1.0, 1, 1, tag_map={"north": "gamma_b"})

    def test_deterministic(self) -> None:
        assert make_rect_mesh(1.0, 0.5, 6, 3).content_hash() == make_rect_mesh(1.0, 0.5, 6, 3).content_hash()


class TestMeshChecks:
    """Tests for the topology invariants."""

    def test_clockwise_triangle(self) -> None:
        mesh = Mesh2D(
            vertices=[[0, 0], [1, 0], [0, 1]],
            triangles=[[0, 2, 1]],
            regions=[0],
            boundary_edges=[[0, 1], [1, 2], [2, 0]],
            boundary_tags=(BoundaryTag.GAMMA_H,) * 3,
        )

        with pytest.raises(MeshError, match="counter-clockwise"):
            mesh.check()

    def test_untagged_boundary(self) -> None:
        mesh = Mesh2D(
            vertices=[[0, 0], [1, 0], [0, 1]],
            triangles=[[0, 1, 2]],
            regions=[0],
            boundary_edges=[[0, 1], [1, 2]],
            boundary_tags=(BoundaryTag.GAMMA_H,) * 2,
        )

        with pytest.raises(MeshError, match="untagged"):
            mesh.check()

    def test_dangling_vertex_reference(self) -> None:
        with pytest.raises(MeshError):
            Mesh2D(
                vertices=[[0, 0], [1, 0]],
                triangles=[[0, 1, 2]],
                regions=[0],
                boundary_edges=[],
                boundary_tags=(),
            )

    def test_locate(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 2, 2)

        found = mesh.locate(np.array([[0.25, 0.1], [2.0, 2.0]]))

        assert found[0] >= 0
        assert found[1] == -1


class TestSegmentMesh:
    """Tests for the parametric machine segment."""

    @pytest.fixture(scope="class")
    def half(self) -> Mesh2D:
        return make_segment_mesh(SegmentGeometry(n_radial_rotor=6, n_radial_stator=6, n_angular=16))

    def test_every_boundary_edge_tagged(self, half: Mesh2D) -> None:
        half.check()

    def test_regions(self, half: Mesh2D) -> None:
        ids = set(half.region_ids)

        assert {ROTOR_REGION, GAP_REGION, STATOR_REGION} <= ids
        # only the conductor at positive angle lies in the half segment
        assert CONDUCTOR_REGION_BASE in ids
        assert CONDUCTOR_REGION_BASE + 1 not in ids

    def test_symmetry_plane_tags(self, half: Mesh2D) -> None:
        labels = dict(zip(half.boundary_labels, half.boundary_tags, strict=True))

        assert labels["cut_max"] is BoundaryTag.GAMMA_H
        assert labels["symmetry_iron"] is BoundaryTag.GAMMA_E
        assert labels["symmetry_air"] is BoundaryTag.GAMMA_B
        assert labels["inner"] is BoundaryTag.GAMMA_B
        assert labels["outer"] is BoundaryTag.GAMMA_B

    def test_full_segment_cuts(self) -> None:
        mesh = make_segment_mesh(
            SegmentGeometry(n_radial_rotor=4, n_radial_stator=4, n_angular=12, full_segment=True)
        )

        mesh.check()
        assert BoundaryTag.GAMMA_E not in mesh.tags
        cut_tags = {tag for tag, label in zip(mesh.boundary_tags, mesh.boundary_labels, strict=True)
                    if label.startswith("cut")}
        assert cut_tags == {BoundaryTag.GAMMA_H}
        assert {CONDUCTOR_REGION_BASE, CONDUCTOR_REGION_BASE + 1} <= set(mesh.region_ids)

    def test_area(self, half: Mesh2D) -> None:
        geo = SegmentGeometry()
        span = math.radians(geo.angular_span) / 2
        expected = 0.5 * span * (geo.r_stator_out**2 - geo.r_rotor_in**2)

        assert math.isclose(half.signed_areas.sum(), expected, rel_tol=5e-3)

    def test_rotation_closes_annulus(self) -> None:
        geo = SegmentGeometry(n_radial_rotor=4, n_radial_stator=4, n_angular=12, full_segment=True)
        mesh = make_segment_mesh(geo)
        t0, t1 = geo.theta_range
        turn = t1 - t0
        rotation = np.array([[math.cos(turn), -math.sin(turn)], [math.sin(turn), math.cos(turn)]])
        theta = np.arctan2(mesh.vertices[:, 1], mesh.vertices[:, 0])
        low = mesh.vertices[np.abs(theta - t0) < 1e-9]
        high = mesh.vertices[np.abs(theta - t1) < 1e-9]

        rotated = low @ rotation.T
        distance = np.min(np.linalg.norm(rotated[:, None, :] - high[None, :, :], axis=-1), axis=1)
        assert distance.max() < 1e-9

    def test_tag_override(self) -> None:
        mesh = make_segment_mesh(
            SegmentGeometry(n_radial_rotor=4, n_radial_stator=4, n_angular=12, tag_overrides={"outer": "gamma_h"})
        )

        outer = {t for t, label in zip(mesh.boundary_tags, mesh.boundary_labels, strict=True) if label == "outer"}
        assert outer == {BoundaryTag.GAMMA_H}

    def test_gap_interface_tagged(self, half: Mesh2D) -> None:
        edges = half.tagged_edges(BoundaryTag.GAMMA_J)

        assert BoundaryTag.GAMMA_J in half.tags
        assert edges.size == len(half.interface_tags)
        assert set(half.interface_tags) == {BoundaryTag.GAMMA_J}

    def test_gap_interface_between_iron_and_air(self, half: Mesh2D) -> None:
        edges = half.tagged_edges(BoundaryTag.GAMMA_J)

        for edge in edges:
            owners = np.flatnonzero(np.any(half.triangle_edges == edge, axis=1))
            assert sorted(half.regions[owners].tolist()) in (
                sorted([ROTOR_REGION, GAP_REGION]),
                sorted([STATOR_REGION, GAP_REGION]),
            )

    def test_gap_interface_override(self) -> None:
        mesh = make_segment_mesh(
            SegmentGeometry(n_radial_rotor=4, n_radial_stator=4, n_angular=12, tag_overrides={"gap": "gamma_b"})
        )

        mesh.check()
        assert BoundaryTag.GAMMA_J not in mesh.tags
        assert set(mesh.interface_tags) == {BoundaryTag.GAMMA_B}

    def test_radii_out_of_order(self) -> None:
        with pytest.raises(InvalidArgumentError, match="radii"):
            SegmentGeometry(r_rotor_out=0.032)

    def test_overlapping_conductors(self) -> None:
        with pytest.raises(InvalidArgumentError, match="overlap"):
            SegmentGeometry(conductors=((0.034, 5.0, 100.0), (0.034, 6.0, -100.0)))


class TestMsh:
    """Tests for the MSH 2.2 reader and writer."""

    def test_unit_square(self) -> None:
        mesh = read_msh(UNIT_SQUARE_MSH, {1: 0, 101: "gamma_h"})
        reference = make_rect_mesh(1.0, 1.0, 1, 1)

        mesh.check()
        assert np.array_equal(mesh.vertices, reference.vertices)
        assert np.array_equal(mesh.edges, reference.edges)
        assert mesh.num_triangles == 2

    def test_quadrangle_rejected(self) -> None:
        text = UNIT_SQUARE_MSH.replace("6 2 2 1 1 1 4 3", "6 3 2 1 1 1 2 4 3")

        with pytest.raises(MeshParseError, match="4-node quadrangle") as info:
            read_msh(text, {1: 0, 101: "gamma_h"})
        assert info.value.line == 18

    def test_missing_mapping(self) -> None:
        with pytest.raises(MeshParseError, match="physical id 101"):
            read_msh(UNIT_SQUARE_MSH, {1: 0})

    def test_dangling_node(self) -> None:
        text = UNIT_SQUARE_MSH.replace("6 2 2 1 1 1 4 3", "6 2 2 1 1 1 4 9")

        with pytest.raises(MeshParseError, match="unknown node 9"):
            read_msh(text, {1: 0, 101: "gamma_h"})

    def test_sparse_node_ids(self) -> None:
        mesh = make_rect_mesh(1.0, 0.5, 3, 2, tag_map={"top": "gamma_b"})
        text = write_msh(mesh)
        # shift every node id by a gap of 10
        lines = text.splitlines()
        start, end = lines.index("$Nodes") + 2, lines.index("$EndNodes")
        for k in range(start, end):
            node, *rest = lines[k].split()
            lines[k] = " ".join([str(int(node) * 10), *rest])
        start, end = lines.index("$Elements") + 2, lines.index("$EndElements")
        for k in range(start, end):
            parts = lines[k].split()
            lines[k] = " ".join(parts[:5] + [str(int(n) * 10) for n in parts[5:]])

        parsed = read_msh("\n".join(lines), default_physical_map(mesh.region_ids))

        assert np.array_equal(parsed.vertices, mesh.vertices)
        assert np.array_equal(parsed.triangles, mesh.triangles)
        assert parsed.boundary_tags == mesh.boundary_tags
        assert parsed.content_hash() == mesh.content_hash()

    def test_interface_round_trip(self) -> None:
        mesh = make_segment_mesh(SegmentGeometry(n_radial_rotor=4, n_radial_stator=4, n_angular=12))

        parsed = read_msh(write_msh(mesh), default_physical_map(mesh.region_ids))

        parsed.check()
        assert parsed.interface_tags == mesh.interface_tags
        assert np.array_equal(parsed.tagged_edges(BoundaryTag.GAMMA_J), mesh.tagged_edges(BoundaryTag.GAMMA_J))
        assert parsed.content_hash() == mesh.content_hash()


class TestVtk:
    """Tests for the legacy VTK writer."""

    def test_mesh_only(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 2, 2)
        text = write_vtk(mesh)

        assert text.startswith("# vtk DataFile Version 3.0")
        assert "DATASET UNSTRUCTURED_GRID" in text
        assert f"CELLS {mesh.num_triangles} {4 * mesh.num_triangles}" in text
        assert "POINT_DATA" not in text

    def test_constant_point_field(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 2, 2)
        text = write_vtk(mesh, point_data={"ones": np.ones(mesh.num_vertices)})

        lines = text.splitlines()
        start = lines.index("SCALARS ones double 1") + 2
        values = [float(v) for v in lines[start : start + mesh.num_vertices]]
        assert values == [1.0] * mesh.num_vertices

    def test_complex_field_split(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 1, 1)
        text = write_vtk(mesh, cell_data={"B": np.full((2, 3), 1 + 2j)})

        assert "VECTORS B_re double" in text
        assert "VECTORS B_im double" in text

    def test_points_round_trip(self) -> None:
        mesh = make_rect_mesh(0.3, 0.7, 5, 4)

        points = _vtk_points(write_vtk(mesh))

        assert np.allclose(points[:, :2], mesh.vertices, rtol=0, atol=1e-12)

    def test_length_mismatch(self) -> None:
        mesh = make_rect_mesh(1.0, 1.0, 1, 1)

        with pytest.raises(InvalidArgumentError, match="expected 4"):
            write_vtk(mesh, point_data={"bad": np.ones(3)})
