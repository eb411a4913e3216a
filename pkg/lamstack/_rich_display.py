"""Rich tables for losses, benchmarks and micro-shape integrals."""

from __future__ import annotations

from collections.abc import Iterable, Mapping

from rich.console import Console
from rich.table import Table

from .bench import PUBLISHED_SEGMENT_LOSSES, BenchRow
from .formulations import LossReport
from .mesh2d import Mesh2D
from .microshape import MicroShapeTable


def _float(value: float | None, fmt: str = ".6e") -> str:
    return "N/A" if value is None else format(value, fmt)


def create_loss_table(report: LossReport, *, title: str | None = None, sheets: int = 1) -> Table:
    """Create a rich table of one loss report.

    Args:
        report: Losses of one lamination period
        title: Custom title; defaults to a generic one
        sheets: Number of sheets the stack losses are scaled to
    """
    table = Table(title=title or "Eddy current losses", show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan", no_wrap=True)
    table.add_column("Value", style="white", justify="right")
    table.add_column("Unit", style="green")
    table.add_row("P", _float(report.P), "W")
    table.add_row("P_EE", _float(report.P_EE), "W")
    if sheets > 1:
        stack = report.scaled(sheets)
        table.add_row(f"P x {sheets} sheets", _float(stack.P), "W")
    table.add_row("DOFs", str(report.dofs), "")
    table.add_row("NNZ", str(report.nnz), "")
    table.add_row("factor NNZ", str(report.factor_nnz), "")
    table.add_row("assembly", _float(report.t_assemble, ".3f"), "s")
    table.add_row("solve", _float(report.t_solve, ".3f"), "s")
    return table


def print_loss_table(
    report: LossReport, *, title: str | None = None, sheets: int = 1, console: Console | None = None
) -> None:
    if console is None:
        console = Console()
    console.print(create_loss_table(report, title=title, sheets=sheets))


def create_bench_table(rows: Iterable[BenchRow], *, title: str | None = None) -> Table:
    """Create a rich table with one line per method, order and variant."""
    table = Table(title=title or "Method comparison", show_header=True, header_style="bold magenta", expand=True)
    table.add_column("Method", style="cyan", no_wrap=True)
    table.add_column("k", justify="center")
    table.add_column("Variant", style="yellow")
    table.add_column("P [W]", justify="right")
    table.add_column("P_EE [W]", justify="right")
    table.add_column("RE", justify="right", style="red")
    table.add_column("RE_EE", justify="right", style="red")
    table.add_column("DOFs", justify="right")
    table.add_column("NNZ", justify="right")
    table.add_column("t [s]", justify="right", style="green")
    for row in rows:
        table.add_row(
            row.method,
            str(row.order),
            row.variant,
            _float(row.P),
            _float(row.P_EE),
            _float(row.RE, "+.3%"),
            _float(row.RE_EE, "+.3%"),
            str(row.dofs),
            str(row.nnz),
            _float(row.t_assemble + row.t_solve, ".2f"),
        )
    return table


def print_bench_table(
    rows: Iterable[BenchRow], *, title: str | None = None, console: Console | None = None
) -> None:
    if console is None:
        console = Console()
    console.print(create_bench_table(rows, title=title))
    references = ", ".join(f"{name} {value * 1e6:.2f} uW" for name, value in PUBLISHED_SEGMENT_LOSSES.items())
    console.print(f"[dim]published 3D segment references: {references}[/dim]")


def create_microshape_table(table: MicroShapeTable, *, nonzero_only: bool = True) -> Table:
    spec = table.spec
    out = Table(
        title=f"Period integrals, d={spec.d:g} m, k_f={spec.k_f:g}",
        show_header=True,
        header_style="bold magenta",
    )
    out.add_column("Part", style="cyan")
    out.add_column("Integrand", style="white")
    out.add_column("Value", justify="right")
    for (part, f, g), value in table:
        if nonzero_only and value == 0:
            continue
        out.add_row(part, f"{f} * {g}", format(value, ".10e"))
    return out


def create_mesh_table(mesh: Mesh2D, counts: Mapping[str, int] | None = None) -> Table:
    out = Table(title="Mesh", show_header=True, header_style="bold magenta")
    out.add_column("Entity", style="cyan")
    out.add_column("Count", justify="right")
    out.add_row("vertices", str(mesh.num_vertices))
    out.add_row("edges", str(mesh.num_edges))
    out.add_row("triangles", str(mesh.num_triangles))
    out.add_row("regions", ", ".join(str(r) for r in mesh.region_ids))
    for tag in sorted(mesh.tags, key=lambda t: t.value):
        out.add_row(tag.value, str(len(mesh.tagged_edges(tag))))
    for name, count in (counts or {}).items():
        out.add_row(name, str(count))
    return out
