"""Command line interface for lamstack.

Exit codes:
- 0: Success
- 2: Configuration or usage errors
- 3: Solver failures
"""

from __future__ import annotations

import json
import logging
import sys
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.text import Text

from ._config import CaseConfig, load_config, parameter_provenance
from ._errors import LamstackError, SolverError
from ._rich_display import (
    create_mesh_table,
    create_microshape_table,
    print_bench_table,
    print_loss_table,
)
from ._types import MU0
from .bench import BenchCase, run_case
from .formulations import run, sample_slice
from .mesh2d import write_msh, write_vtk
from .microshape import LaminationSpec, integral_table
from .oracles import CrossSectionProblem, cross_section_fem, lamination_1d, strip_reference

RED_CROSS = Text.from_markup("[red bold]:cross_mark:")
GREEN_CHECK_MARK = Text.from_markup("[green bold]:heavy_check_mark:")

EXIT_CONFIG = 2
EXIT_SOLVER = 3


@contextmanager
def reporting_errors(console: Console) -> Iterator[None]:
    """Map library errors to exit codes, printing the message."""
    try:
        yield
    except (SystemExit, KeyboardInterrupt):
        raise
    except SolverError as e:
        console.print(RED_CROSS, f"Solver failure: {e}")
        sys.exit(EXIT_SOLVER)
    except (LamstackError, ValueError, OSError) as e:
        console.print(RED_CROSS, f"Error: {e}")
        sys.exit(EXIT_CONFIG)


def _complex_pair(value: complex) -> list[float]:
    return [float(np.real(value)), float(np.imag(value))]


def emit_json(document: dict[str, Any], target: Path | None) -> None:
    """Write ``document`` to ``target``, or to stdout when it is ``None`` or ``-``."""
    text = json.dumps(document, indent=2)
    if target is None or str(target) == "-":
        click.echo(text)
    else:
        target.write_text(text + "\n")


def command_document(body: dict[str, Any]) -> dict[str, Any]:
    """``body`` with the provenance of the running command and its parameters."""
    ctx = click.get_current_context()
    command = ctx.command_path.split(" ", 1)[-1]
    return {"provenance": parameter_provenance(command, ctx.params), **body}


def _lamination(d: float, kf: float | None, d0: float | None) -> LaminationSpec:
    if (kf is None) == (d0 is None):
        raise click.UsageError("give exactly one of --kf or --d0")
    return LaminationSpec(d=d, k_f=kf) if kf is not None else LaminationSpec.from_d0(d, d0)  # type: ignore[arg-type]


@click.group()
@click.version_option(package_name="lamstack")
@click.option("-v", "--verbose", is_flag=True, help="Log debug output of the solver stages.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """lamstack - multiscale eddy current solvers for laminated cores."""
    console = ctx.ensure_object(Console)
    logger = logging.getLogger("lamstack")
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=console, show_path=False))
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


@cli.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--vtk", "vtk_path", type=click.Path(dir_okay=False, path_type=Path), help="Write the mesh as VTK.")
@click.option("--msh", "msh_path", type=click.Path(dir_okay=False, path_type=Path), help="Write the mesh as MSH 2.2.")
@click.pass_obj
def mesh(console: Console, config: Path, vtk_path: Path | None, msh_path: Path | None) -> None:
    """Build and check the mesh of a case file."""
    with reporting_errors(console):
        case = load_config(config)
        built = case.mesh
        built.check()
        console.print(create_mesh_table(built))
        if vtk_path is not None:
            vtk_path.write_text(write_vtk(built, cell_data={"region": built.regions.astype(float)}))
        if msh_path is not None:
            msh_path.write_text(write_msh(built))
        console.print(GREEN_CHECK_MARK, f"mesh {built.content_hash()[:12]} is valid")


@cli.command()
@click.option("--d", "d", type=float, required=True, help="Sheet thickness [m].")
@click.option("--kf", type=float, default=None, help="Fill factor d / p.")
@click.option("--d0", type=float, default=None, help="Insulation thickness [m].")
@click.option("--verify/--no-verify", default=True, help="Cross-check with adaptive quadrature.")
@click.option("--show", is_flag=True, help="Print a table instead of JSON.")
@click.pass_obj
def table(console: Console, d: float, kf: float | None, d0: float | None, verify: bool, show: bool) -> None:
    """Period integrals of the micro-shape functions."""
    with reporting_errors(console):
        spec = _lamination(d, kf, d0)
        result = integral_table(spec, verify=verify)
        if show:
            console.print(create_microshape_table(result))
            return
        emit_json(command_document({"d": spec.d, "k_f": spec.k_f, "p": spec.p, "entries": result.as_dict}), None)


@cli.group()
def oracle() -> None:
    """Reference solutions of a single sheet."""


@oracle.command()
@click.option("--f", "frequency", type=float, required=True, help="Frequency [Hz].")
@click.option("--d", "d", type=float, required=True, help="Sheet thickness [m].")
@click.option("--sigma", type=float, required=True, help="Conductivity [S/m].")
@click.option("--mu-r", type=float, required=True, help="Relative permeability.")
@click.option("--h0", type=float, default=1.0, show_default=True, help="Surface field [A/m].")
@click.option("--samples", type=click.IntRange(min=2), default=11, show_default=True)
@click.pass_obj
def lamination(
    console: Console, frequency: float, d: float, sigma: float, mu_r: float, h0: float, samples: int
) -> None:
    """Closed-form field of an infinite sheet."""
    with reporting_errors(console):
        profile = lamination_1d(h0, d, sigma, MU0 * mu_r, frequency)
        z = np.linspace(-d / 2, d / 2, samples)
        document = {
            "delta": profile.delta,
            "loss": profile.loss,
            "loss_density": profile.loss_density,
            "profile": [{"z": float(zk), "H": _complex_pair(h)} for zk, h in zip(z, profile.H(z), strict=True)],
        }
        emit_json(command_document(document), None)


def _physics_options(func: Callable[..., Any]) -> Callable[..., Any]:
    for decorator in reversed(
        [
            click.option("--w", "width", type=float, required=True, help="Strip width [m]."),
            click.option("--d", "d", type=float, required=True, help="Sheet thickness [m]."),
            click.option("--sigma", type=float, required=True, help="Conductivity [S/m]."),
            click.option("--mu-r", type=float, required=True, help="Relative permeability."),
            click.option("--f", "frequency", type=float, required=True, help="Frequency [Hz]."),
            click.option("--h0", type=float, default=1.0, show_default=True, help="Boundary field [A/m]."),
            click.option("--nx", type=click.IntRange(min=4), default=400, show_default=True),
            click.option("--nz", type=click.IntRange(min=4), default=40, show_default=True),
        ]
    ):
        func = decorator(func)
    return func


@oracle.command()
@_physics_options
@click.option("--samples", type=click.IntRange(min=2), default=11, show_default=True)
@click.pass_obj
def xsection(
    console: Console,
    width: float,
    d: float,
    sigma: float,
    mu_r: float,
    frequency: float,
    h0: float,
    nx: int,
    nz: int,
    samples: int,
) -> None:
    """Brute-force cross-section of one sheet."""
    with reporting_errors(console):
        problem = CrossSectionProblem(width, d, sigma, MU0 * mu_r, frequency, h0)
        result = cross_section_fem(problem, nx, nz)
        z, h = result.column(width / 2)
        picks = np.unique(np.linspace(0, len(z) - 1, samples).round().astype(int))
        document = {
            "delta": lamination_1d(h0, d, sigma, MU0 * mu_r, frequency).delta,
            "P_ref": result.P,
            "P_EE_ref": result.P_EE,
            "profile": [{"z": float(z[i]), "H": _complex_pair(h[i])} for i in picks],
        }
        emit_json(command_document(document), None)


@oracle.command()
@_physics_options
@click.option("--kf", type=float, required=True, help="Fill factor d / p.")
@click.pass_obj
def strip(
    console: Console,
    width: float,
    d: float,
    sigma: float,
    mu_r: float,
    frequency: float,
    h0: float,
    nx: int,
    nz: int,
    kf: float,
) -> None:
    """Cross-section losses in the normalization of the multiscale strip."""
    with reporting_errors(console):
        reference = strip_reference(width, LaminationSpec(d=d, k_f=kf), sigma, mu_r, frequency, h0, nx=nx, nz=nz)
        emit_json(command_document(reference.as_dict()), None)


def _write_slices(case: CaseConfig, solution: Any, z_values: tuple[float, ...], vtk_path: Path) -> None:
    cells: dict[str, Any] = {"region": case.mesh.regions.astype(float)}
    for z in z_values:
        for name, values in sample_slice(solution, z).items():
            cells[f"{name}_z{z:.6g}"] = values
    title = "lamstack " + " ".join(f"z={z:g}" for z in z_values)
    vtk_path.write_text(write_vtk(case.mesh, cell_data=cells, title=title))


@cli.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--method", default=None, help="Override problem.method.")
@click.option("--order", type=int, default=None, help="Override problem.edge_order.")
@click.option("--z-slice", "z_slices", type=float, multiple=True, help="Height of a VTK field slice [m].")
@click.option("--vtk", "vtk_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--json", "json_path", type=click.Path(dir_okay=False, allow_dash=True, path_type=Path))
@click.pass_obj
def solve(
    console: Console,
    config: Path,
    method: str | None,
    order: int | None,
    z_slices: tuple[float, ...],
    vtk_path: Path | None,
    json_path: Path | None,
) -> None:
    """Solve one case and report its losses."""
    with reporting_errors(console):
        case = load_config(config)
        problem = case.build_problem(method, order)
        solution, report = run(problem)
        z_values = z_slices or case.output.z_slices
        vtk_path = vtk_path or case.output.vtk
        if vtk_path is not None:
            _write_slices(case, solution, z_values or (0.0,), vtk_path)
        json_path = json_path or case.output.json
        sheets = case.output.stack_sheets
        document = {
            "provenance": case.provenance(),
            "method": problem.config.method.value,
            "edge_order": problem.config.edge_order,
            "stack_sheets": sheets,
            "P_stack": report.scaled(sheets).P,
            **report.as_dict(),
        }
        if json_path is not None and str(json_path) == "-":
            emit_json(document, None)
            return
        print_loss_table(report, title=f"{problem.config.method.value}, k={problem.config.edge_order}",
                         sheets=sheets, console=console)
        if json_path is not None:
            emit_json(document, json_path)


@cli.command()
@click.argument("case_file", metavar="CASE", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--json", "json_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.pass_obj
def bench(
    console: Console, case_file: Path, csv_path: Path | None, json_path: Path | None, workers: int | None
) -> None:
    """Compare methods and orders on one case."""
    with reporting_errors(console):
        case = BenchCase.from_config(load_config(case_file))
        result = run_case(case, workers=workers)
        print_bench_table(result.rows, title=f"Case {case.case_id}", console=console)
        csv_path = csv_path or case.config.bench.csv
        json_path = json_path or case.config.bench.json
        if csv_path is not None:
            csv_path.write_text(result.to_csv())
        if json_path is not None:
            json_path.write_text(result.to_json() + "\n")


def main(args: list[str] | None = None) -> None:
    """Main CLI entry point.

    Args:
        args: Command line arguments (for testing)
    """
    try:
        cli(args or sys.argv[1:], standalone_mode=False)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_CONFIG)


if __name__ == "__main__":
    main()
