"""Shared test fixtures and utilities for the lamstack test suite."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import pytest
from rich.console import Console

from lamstack._types import RegionId
from lamstack.mesh2d import Mesh2D, RegionSpec, make_rect_mesh
from lamstack.microshape import LaminationSpec


# Material data of the strip and segment benchmarks
class Materials:
    """Standard material constants for testing."""

    SIGMA = 2.08e6
    MU_R = 1000.0
    FREQUENCY = 50.0
    D = 0.5e-3
    FILL_FACTOR = 0.95


STRIP_CASE = """\
[lamination]
d = 0.5e-3
fill_factor = 0.95

[[regions]]
id = 0
kind = "laminated"
sigma = 2.08e6
mu_r = 1000.0

[mesh]
kind = "strip"
width = 0.01
height = 0.001
nx = {nx}
ny = 2

[problem]
method = "{method}"
edge_order = {order}
frequency = 50.0

[problem.boundary]
gamma_h = [0.0, 1.0]
"""


@pytest.fixture
def lamination() -> LaminationSpec:
    return LaminationSpec(d=Materials.D, k_f=Materials.FILL_FACTOR)


@pytest.fixture
def unit_square() -> Mesh2D:
    """Two-triangle unit square with every side on ``gamma_h``."""
    return make_rect_mesh(1.0, 1.0, 1, 1)


@pytest.fixture
def laminated_regions(lamination: LaminationSpec) -> dict[RegionId, RegionSpec]:
    return {
        RegionId(0): RegionSpec(RegionId(0), "laminated", Materials.SIGMA, Materials.MU_R, lamination)
    }


def write_strip_case(directory: Path, *, method: str = "TMS1", order: int = 1, nx: int = 10, extra: str = "") -> Path:
    """Write a strip case file and return its path."""
    path = directory / f"strip_{method.lower()}.toml"
    path.write_text(STRIP_CASE.format(method=method, order=order, nx=nx) + extra)
    return path


@pytest.fixture
def strip_case(tmp_path: Path) -> Path:
    return write_strip_case(tmp_path)


def run_with_console_capture(
    action_func: Callable[..., None], *args: object, **kwargs: object
) -> str:
    """Run a function with a console in capture mode and return the captured output.

    Convention: Functions should accept console as a keyword argument named 'console'.
    """
    # Use a wide console with force_terminal to prevent text truncation in tests
    console = Console(width=200, force_terminal=True)

    with console.capture() as capture:
        kwargs["console"] = console
        action_func(*args, **kwargs)

    return str(capture.get())


def pytest_configure(config: pytest.Config) -> None:
    """Configure pytest with lamstack-specific markers."""
    config.addinivalue_line(
        "markers", "slow: acceptance runs over fine meshes"
    )
    config.addinivalue_line(
        "markers", "oracle: mark test as checking against a reference solution"
    )
    config.addinivalue_line(
        "markers", "formulation: mark test as exercising a multiscale formulation"
    )
