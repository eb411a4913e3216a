"""TOML case files for the command line.

A case file describes lamination, materials, mesh and discretization of a
solve, plus optional output and benchmark settings. Every table rejects
unknown keys.
"""

from __future__ import annotations

import hashlib
import json
import sys
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

from ._errors import ConfigError, InvalidArgumentError, InvalidProblemError, LamstackError
from ._types import BoundaryTag, ExcitationMode, MethodId, RegionId
from .excitation import ConductorSpec
from .formulations import DiscretizationConfig, MultiscaleProblem
from .mesh2d import Mesh2D, RegionSpec, SegmentGeometry, make_rect_mesh, make_segment_mesh, read_msh
from .microshape import LaminationSpec

TOP_LEVEL = ("lamination", "regions", "conductors", "mesh", "problem", "output", "bench")
STRIP_KEYS = ("kind", "width", "height", "nx", "ny", "region", "sides")
SEGMENT_KEYS = (
    "kind",
    "r_rotor_in",
    "r_rotor_out",
    "r_stator_in",
    "r_stator_out",
    "angular_span",
    "conductor_radius",
    "conductors",
    "n_radial_rotor",
    "n_radial_gap",
    "n_radial_stator",
    "n_angular",
    "full_segment",
    "tag_overrides",
)
MSH_KEYS = ("kind", "path", "physical")
PROBLEM_KEYS = (
    "method",
    "edge_order",
    "frequency",
    "excitation",
    "w1_order",
    "a_source",
    "curl_penalty",
    "curl_free",
    "edge_effect",
    "quadrature_degree",
    "boundary",
)
OUTPUT_KEYS = ("stack_sheets", "z_slices", "vtk", "json")
BENCH_KEYS = ("methods", "orders", "oracle", "oracle_nx", "oracle_nz", "half_and_entire", "workers", "csv", "json")


def read_toml(path: Path) -> tuple[dict[str, Any], bytes]:
    """Parsed TOML document and its raw bytes."""
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        try:
            import tomli as tomllib
        except ImportError:
            raise ConfigError("reading TOML on Python 3.10 needs tomli, install lamstack[cli]") from None
    try:
        data: dict[str, Any] = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return data, raw


def _check_keys(table: Mapping[str, Any], allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}, expected one of: {', '.join(allowed)}")


def _table(data: Mapping[str, Any], key: str) -> dict[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{key}] must be a table")
    return value


def _require(table: Mapping[str, Any], key: str, where: str) -> Any:
    try:
        return table[key]
    except KeyError:
        raise ConfigError(f"missing key {where}.{key}") from None


def parse_complex(value: Any, where: str) -> complex:
    """A real number or a ``[re, im]`` pair."""
    if isinstance(value, bool):
        raise ConfigError(f"{where} must be a number or [re, im]")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where} must be a number or [re, im], got {value!r}")


def _trace(value: Any, where: str) -> tuple[complex, complex]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"{where} must be an in-plane vector [hx, hy]")
    return parse_complex(value[0], f"{where}[0]"), parse_complex(value[1], f"{where}[1]")


def parse_lamination(table: Mapping[str, Any]) -> LaminationSpec:
    _check_keys(table, ("d", "fill_factor", "d0"), "lamination")
    d = float(_require(table, "d", "lamination"))
    if ("fill_factor" in table) == ("d0" in table):
        raise ConfigError("lamination needs exactly one of fill_factor or d0")
    if "d0" in table:
        return LaminationSpec.from_d0(d, float(table["d0"]))
    return LaminationSpec(d=d, k_f=float(table["fill_factor"]))


def parse_regions(entries: Any, lamination: LaminationSpec) -> dict[RegionId, RegionSpec]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("[[regions]] must list at least one region")
    regions: dict[RegionId, RegionSpec] = {}
    for k, entry in enumerate(entries):
        where = f"regions[{k}]"
        _check_keys(entry, ("id", "kind", "sigma", "mu_r"), where)
        rid = RegionId(int(_require(entry, "id", where)))
        if rid in regions:
            raise ConfigError(f"{where}: region {rid} is listed twice")
        kind = _require(entry, "kind", where)
        regions[rid] = RegionSpec(
            rid,
            kind,
            float(entry.get("sigma", 0.0)),
            float(entry.get("mu_r", 1.0)),
            lamination if kind == "laminated" else None,
        )
    return regions


def parse_conductors(entries: Any) -> tuple[ConductorSpec, ...]:
    if not isinstance(entries, list):
        raise ConfigError("[[conductors]] must be an array of tables")
    conductors = []
    for k, entry in enumerate(entries):
        where = f"conductors[{k}]"
        _check_keys(entry, ("center", "radius", "current"), where)
        center = _require(entry, "center", where)
        if not isinstance(center, list) or len(center) != 2:
            raise ConfigError(f"{where}.center must be [x, y]")
        conductors.append(
            ConductorSpec(
                (float(center[0]), float(center[1])),
                float(_require(entry, "radius", where)),
                parse_complex(_require(entry, "current", where), f"{where}.current"),
            )
        )
    return tuple(conductors)


@dataclass(frozen=True)
class MeshConfig:
    kind: str
    params: Mapping[str, Any]
    base_dir: Path = Path()

    @classmethod
    def parse(cls, table: Mapping[str, Any], base_dir: Path) -> MeshConfig:
        kind = _require(table, "kind", "mesh")
        allowed = {"strip": STRIP_KEYS, "segment": SEGMENT_KEYS, "msh": MSH_KEYS}.get(kind)
        if allowed is None:
            raise ConfigError(f"mesh.kind must be strip, segment or msh, got {kind!r}")
        _check_keys(table, allowed, "mesh")
        return cls(kind, dict(table), base_dir)

    def segment_geometry(self) -> SegmentGeometry:
        params = {k: v for k, v in self.params.items() if k != "kind"}
        if "conductors" in params:
            params["conductors"] = tuple(
                (float(r), float(t), parse_complex(i, "mesh.conductors")) for r, t, i in params["conductors"]
            )
        if "tag_overrides" in params:
            params["tag_overrides"] = {k: BoundaryTag.parse(v) for k, v in params["tag_overrides"].items()}
        return SegmentGeometry(**params)

    def build(self) -> Mesh2D:
        params = self.params
        if self.kind == "strip":
            return make_rect_mesh(
                float(_require(params, "width", "mesh")),
                float(_require(params, "height", "mesh")),
                int(params.get("nx", 40)),
                int(params.get("ny", 2)),
                region=int(params.get("region", 0)),
                tag_map=params.get("sides"),
            )
        if self.kind == "segment":
            return make_segment_mesh(self.segment_geometry())
        path = self.base_dir / str(_require(params, "path", "mesh"))
        physical: dict[int, int | BoundaryTag | str] = {}
        for key, value in dict(params.get("physical", {})).items():
            if isinstance(value, str) and value.startswith("region:"):
                physical[int(key)] = int(value.split(":", 1)[1])
            else:
                physical[int(key)] = BoundaryTag.parse(value)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read mesh {path}: {exc.strerror}") from None
        return read_msh(text, physical)


@dataclass(frozen=True)
class OutputConfig:
    stack_sheets: int = 1
    z_slices: tuple[float, ...] = ()
    vtk: Path | None = None
    json: Path | None = None


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple[MethodId, ...] = tuple(MethodId)
    orders: tuple[int, ...] = (0, 1, 2)
    oracle: str = "strip"
    oracle_nx: int = 400
    oracle_nz: int = 40
    half_and_entire: bool = False
    workers: int = 1
    csv: Path | None = None
    json: Path | None = None


@dataclass(frozen=True, eq=False)
class CaseConfig:
    """A parsed case file."""

    lamination: LaminationSpec
    regions: Mapping[RegionId, RegionSpec]
    conductors: tuple[ConductorSpec, ...]
    mesh_config: MeshConfig
    problem: DiscretizationConfig
    output: OutputConfig = field(default_factory=OutputConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    raw: bytes = b""
    source: Path | None = None

    @cached_property
    def mesh(self) -> Mesh2D:
        return self.mesh_config.build()

    @cached_property
    def sources(self) -> tuple[ConductorSpec, ...]:
        """Conductors of the case; segment meshes bring their own."""
        if self.conductors or self.mesh_config.kind != "segment":
            return self.conductors
        return tuple(self.mesh_config.segment_geometry().conductor_specs())

    @property
    def config_sha256(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()

    def provenance(self) -> dict[str, str]:
        from . import __version__

        return {
            "config_sha256": self.config_sha256,
            "mesh_sha256": self.mesh.content_hash(),
            "version": __version__,
        }

    def discretization(self, method: MethodId | str | None = None, order: int | None = None) -> DiscretizationConfig:
        """The problem settings, optionally for another method and order.

        The excitation follows the method family when conductors are present.
        """
        base = self.problem
        method = MethodId.parse(method) if method is not None else base.method
        excitation = base.excitation
        if excitation is not ExcitationMode.BOUNDARY_ONLY:
            excitation = ExcitationMode.BIOT_SAVART if method.is_t_family else ExcitationMode.IMPRESSED_J0
        return DiscretizationConfig(
            method=method,
            edge_order=base.edge_order if order is None else order,
            frequency=base.frequency,
            boundary=base.boundary,
            excitation=excitation,
            w1_order=base.w1_order,
            a_source=base.a_source,
            curl_penalty=base.curl_penalty,
            curl_free=base.curl_free,
            edge_effect=base.edge_effect,
            quadrature_degree=base.quadrature_degree,
        )

    def build_problem(
        self, method: MethodId | str | None = None, order: int | None = None, *, mesh: Mesh2D | None = None
    ) -> MultiscaleProblem:
        config = self.discretization(method, order)
        conductors = () if config.excitation is ExcitationMode.BOUNDARY_ONLY else self.sources
        return MultiscaleProblem(mesh or self.mesh, self.regions, self.lamination, config, conductors)


def parameter_provenance(command: str, parameters: Mapping[str, Any]) -> dict[str, str | None]:
    """Provenance of a document computed from command-line parameters alone.

    The parameters are hashed as canonical JSON; such documents have no mesh
    file, so ``mesh_sha256`` is None.
    """
    from . import __version__

    canonical = json.dumps({"command": command, **parameters}, sort_keys=True, separators=(",", ":"), default=str)
    return {
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "mesh_sha256": None,
        "version": __version__,
    }


def parse_problem(table: Mapping[str, Any], has_conductors: bool) -> DiscretizationConfig:
    _check_keys(table, PROBLEM_KEYS, "problem")
    try:
        method = MethodId.parse(_require(table, "method", "problem"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    boundary_table = table.get("boundary", {})
    if not isinstance(boundary_table, dict):
        raise ConfigError("[problem.boundary] must be a table")
    boundary = {}
    for tag, value in boundary_table.items():
        try:
            boundary[BoundaryTag.parse(tag)] = _trace(value, f"problem.boundary.{tag}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    excitation = table.get("excitation", "auto")
    if excitation == "auto":
        if not has_conductors:
            excitation = ExcitationMode.BOUNDARY_ONLY
        else:
            excitation = ExcitationMode.BIOT_SAVART if method.is_t_family else ExcitationMode.IMPRESSED_J0
    try:
        return DiscretizationConfig(
            method=method,
            edge_order=int(table.get("edge_order", 1)),
            frequency=float(table.get("frequency", 50.0)),
            boundary=boundary,
            excitation=ExcitationMode(excitation),
            w1_order=table.get("w1_order"),
            a_source=table.get("a_source", "by_parts"),
            curl_penalty=float(table.get("curl_penalty", DiscretizationConfig.curl_penalty)),
            curl_free=bool(table.get("curl_free", True)),
            edge_effect=bool(table.get("edge_effect", True)),
            quadrature_degree=table.get("quadrature_degree"),
        )
    except (LamstackError, ValueError) as exc:
        raise ConfigError(f"[problem]: {exc}") from None


def _optional_path(value: Any, base_dir: Path) -> Path | None:
    return None if value is None else base_dir / str(value)


def parse_output(table: Mapping[str, Any], base_dir: Path) -> OutputConfig:
    _check_keys(table, OUTPUT_KEYS, "output")
    sheets = int(table.get("stack_sheets", 1))
    if sheets < 1:
        raise ConfigError("output.stack_sheets must be at least 1")
    return OutputConfig(
        stack_sheets=sheets,
        z_slices=tuple(float(z) for z in table.get("z_slices", ())),
        vtk=_optional_path(table.get("vtk"), base_dir),
        json=_optional_path(table.get("json"), base_dir),
    )


def parse_bench(table: Mapping[str, Any], base_dir: Path) -> BenchConfig:
    _check_keys(table, BENCH_KEYS, "bench")
    try:
        methods = tuple(MethodId.parse(m) for m in table.get("methods", [m.value for m in MethodId]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not methods:
        raise ConfigError("bench.methods must name at least one method")
    orders = tuple(int(k) for k in table.get("orders", (0, 1, 2)))
    if not orders or any(k not in (0, 1, 2) for k in orders):
        raise ConfigError("bench.orders must be a non-empty subset of 0, 1, 2")
    oracle = table.get("oracle", "strip")
    if oracle not in ("strip", "none"):
        raise ConfigError(f"bench.oracle must be strip or none, got {oracle!r}")
    workers = int(table.get("workers", 1))
    if workers < 1:
        raise ConfigError("bench.workers must be at least 1")
    return BenchConfig(
        methods=methods,
        orders=orders,
        oracle=oracle,
        oracle_nx=int(table.get("oracle_nx", 400)),
        oracle_nz=int(table.get("oracle_nz", 40)),
        half_and_entire=bool(table.get("half_and_entire", False)),
        workers=workers,
        csv=_optional_path(table.get("csv"), base_dir),
        json=_optional_path(table.get("json"), base_dir),
    )


def parse_config(
    data: Mapping[str, Any], *, raw: bytes = b"", source: Path | None = None
) -> CaseConfig:
    """Build a :class:`CaseConfig` from a parsed TOML document."""
    _check_keys(data, TOP_LEVEL, "<root>")
    base_dir = source.parent if source is not None else Path()
    try:
        lamination = parse_lamination(_table(data, "lamination"))
        regions = parse_regions(data.get("regions"), lamination)
        conductors = parse_conductors(data.get("conductors", []))
        mesh_config = MeshConfig.parse(_table(data, "mesh"), base_dir)
        has_conductors = bool(conductors) or mesh_config.kind == "segment"
        problem = parse_problem(_table(data, "problem"), has_conductors)
        output = parse_output(_table(data, "output"), base_dir)
        bench = parse_bench(_table(data, "bench"), base_dir)
    except (InvalidArgumentError, InvalidProblemError) as exc:
        raise ConfigError(str(exc)) from None
    return CaseConfig(lamination, regions, conductors, mesh_config, problem, output, bench, raw, source)


def load_config(path: Path | str) -> CaseConfig:
    path = Path(path)
    data, raw = read_toml(path)
    return parse_config(data, raw=raw, source=path)
