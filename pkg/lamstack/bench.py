"""Method comparison runs over methods, orders and segment variants."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from ._config import CaseConfig, MeshConfig
from ._errors import ConfigError
from ._types import BoundaryTag, MethodId
from .formulations import run
from .oracles import StripReference, strip_reference

logger = logging.getLogger(__name__)

# published segment losses of the two 3D reference formulations [W]; shown next
# to benchmark output only
PUBLISHED_SEGMENT_LOSSES: dict[str, float] = {"T,Phi-Phi": 47.65e-6, "A,V-A": 47.40e-6}

CSV_COLUMNS = (
    "case",
    "method",
    "order",
    "variant",
    "P",
    "P_EE",
    "RE",
    "RE_EE",
    "dofs",
    "nnz",
    "factor_nnz",
    "t_assemble",
    "t_solve",
)


@dataclass(frozen=True)
class BenchJob:
    method: MethodId
    order: int
    variant: str = "default"


@dataclass(frozen=True)
class BenchRow:
    case: str
    method: str
    order: int
    variant: str
    P: float
    P_EE: float
    RE: float | None
    RE_EE: float | None
    dofs: int
    nnz: int
    factor_nnz: int
    t_assemble: float
    t_solve: float

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class BenchCase:
    """A case file together with the jobs it expands to."""

    case_id: str
    config: CaseConfig

    @classmethod
    def from_config(cls, config: CaseConfig) -> BenchCase:
        case_id = config.source.stem if config.source is not None else "case"
        if config.bench.half_and_entire and config.mesh_config.kind != "segment":
            raise ConfigError("bench.half_and_entire needs a segment mesh")
        if config.bench.oracle == "strip" and config.mesh_config.kind != "strip":
            raise ConfigError("the strip oracle needs a strip mesh, set bench.oracle = \"none\"")
        return cls(case_id, config)

    def jobs(self) -> list[BenchJob]:
        variants = ("half", "entire") if self.config.bench.half_and_entire else ("default",)
        return [
            BenchJob(method, order, variant)
            for variant in variants
            for method in self.config.bench.methods
            for order in self.config.bench.orders
        ]

    def config_for(self, variant: str) -> CaseConfig:
        if variant == "default":
            return self.config
        params = dict(self.config.mesh_config.params)
        params["full_segment"] = variant == "entire"
        mesh_config = MeshConfig(self.config.mesh_config.kind, params, self.config.mesh_config.base_dir)
        return replace(self.config, mesh_config=mesh_config)


def strip_oracle(config: CaseConfig) -> StripReference:
    """Cross-section reference of a strip case driven on ``gamma_h``."""
    params = config.mesh_config.params
    trace = config.problem.boundary.get(BoundaryTag.GAMMA_H)
    if trace is None or callable(trace):
        raise ConfigError("the strip oracle needs a constant trace in problem.boundary.gamma_h")
    laminated = [spec for spec in config.regions.values() if spec.is_laminated]
    if len(laminated) != 1:
        raise ConfigError("the strip oracle needs exactly one laminated region")
    spec = laminated[0]
    return strip_reference(
        float(params["width"]),
        config.lamination,
        spec.sigma,
        spec.mu_r,
        config.problem.frequency,
        complex(trace[1]),
        nx=config.bench.oracle_nx,
        nz=config.bench.oracle_nz,
    )


def _relative(value: float, reference: float | None) -> float | None:
    if reference is None or reference == 0:
        return None
    return (value - reference) / reference


def run_job(case: BenchCase, job: BenchJob, reference: StripReference | None) -> BenchRow:
    config = case.config_for(job.variant)
    problem = config.build_problem(job.method, job.order)
    _solution, report = run(problem)
    # strip losses are compared per unit length
    scale = 1.0 / float(config.mesh_config.params["height"]) if reference is not None else 1.0
    logger.info("%s %s k=%d %s: P=%.6e W", case.case_id, job.method.value, job.order, job.variant, report.P)
    return BenchRow(
        case=case.case_id,
        method=job.method.value,
        order=job.order,
        variant=job.variant,
        P=report.P,
        P_EE=report.P_EE,
        RE=_relative(report.P * scale, reference.P_ref if reference else None),
        RE_EE=_relative(report.P_EE * scale, reference.P_EE_ref if reference else None),
        dofs=report.dofs,
        nnz=report.nnz,
        factor_nnz=report.factor_nnz,
        t_assemble=report.t_assemble,
        t_solve=report.t_solve,
    )


@dataclass
class BenchResult:
    case: BenchCase
    rows: list[BenchRow] = field(default_factory=list)
    reference: StripReference | None = None

    def __iter__(self) -> Iterator[BenchRow]:
        return iter(self.rows)

    def to_json(self) -> str:
        document = {
            "provenance": self.case.config.provenance(),
            "reference": self.reference.as_dict() if self.reference else None,
            "published_losses": PUBLISHED_SEGMENT_LOSSES,
            "rows": [row.as_dict() for row in self.rows],
        }
        return json.dumps(document, indent=2)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        provenance = self.case.config.provenance()
        buffer.write("".join(f"# {key}: {value}\n" for key, value in provenance.items()))
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({key: "" if value is None else repr(value) if isinstance(value, float) else value
                             for key, value in row.as_dict().items()})
        return buffer.getvalue()


def read_csv_rows(text: str) -> list[dict[str, str]]:
    """Rows of a benchmark CSV, skipping the provenance header."""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def run_case(case: BenchCase, *, workers: int | None = None) -> BenchResult:
    """Run every job of ``case``; rows come back in job order."""
    bench = case.config.bench
    reference = strip_oracle(case.config) if bench.oracle == "strip" else None
    jobs = case.jobs()
    workers = workers or bench.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(run_job, case, job, reference) for job in jobs]
            rows = [future.result() for future in futures]
    else:
        rows = [run_job(case, job, reference) for job in jobs]
    return BenchResult(case, rows, reference)


def dof_ratio(rows: Sequence[BenchRow]) -> dict[tuple[str, int], float]:
    """Entire over half segment DOFs per ``(method, order)``."""
    half = {(r.method, r.order): r.dofs for r in rows if r.variant == "half"}
    return {
        (r.method, r.order): r.dofs / half[(r.method, r.order)]
        for r in rows
        if r.variant == "entire" and (r.method, r.order) in half
    }
