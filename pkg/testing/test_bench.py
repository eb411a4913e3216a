"""Tests for the method comparison runs."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from conftest import write_strip_case
from lamstack._config import load_config
from lamstack._errors import ConfigError
from lamstack._types import MethodId
from lamstack.bench import (
    CSV_COLUMNS,
    BenchCase,
    BenchJob,
    BenchResult,
    BenchRow,
    dof_ratio,
    read_csv_rows,
    run_case,
    strip_oracle,
)

SMALL_BENCH = """
[bench]
methods = ["TMS1", "AMS2"]
orders = [0, 1]
oracle_nx = 20
oracle_nz = 4
"""

SEGMENT_CASE = """\
[lamination]
d = 0.5e-3
fill_factor = 0.95

[[regions]]
id = 0
kind = "laminated"
sigma = 2.08e6
mu_r = 1000.0

[[regions]]
id = 1
kind = "air"

[[regions]]
id = 2
kind = "laminated"
sigma = 2.08e6
mu_r = 1000.0

[[regions]]
id = 3
kind = "conductor"

[[regions]]
id = 4
kind = "conductor"

[mesh]
kind = "segment"
n_radial_rotor = 3
n_radial_gap = 1
n_radial_stator = 4
n_angular = 12

[problem]
method = "TMS1"
edge_order = 0

[bench]
methods = ["TMS1"]
orders = [0]
oracle = "none"
half_and_entire = true
"""


def row(method: str, order: int, variant: str, dofs: int) -> BenchRow:
    return BenchRow("case", method, order, variant, 1.0, 0.1, None, None, dofs, 4 * dofs, 0, 0.0, 0.0)


class TestBenchCase:
    """Tests for job expansion and case checks."""

    def test_jobs(self, tmp_path: Path) -> None:
        case = BenchCase.from_config(load_config(write_strip_case(tmp_path, extra=SMALL_BENCH)))

        assert case.case_id == "strip_tms1"
        assert case.jobs() == [
            BenchJob(MethodId.TMS1, 0),
            BenchJob(MethodId.TMS1, 1),
            BenchJob(MethodId.AMS2, 0),
            BenchJob(MethodId.AMS2, 1),
        ]

    def test_half_and_entire_jobs(self, tmp_path: Path) -> None:
        path = tmp_path / "segment.toml"
        path.write_text(SEGMENT_CASE)

        case = BenchCase.from_config(load_config(path))

        assert [job.variant for job in case.jobs()] == ["half", "entire"]
        assert case.config_for("entire").mesh_config.params["full_segment"] is True
        assert case.config_for("default") is case.config

    def test_half_and_entire_needs_segment(self, tmp_path: Path) -> None:
        config = load_config(write_strip_case(tmp_path, extra="\n[bench]\nhalf_and_entire = true\n"))

        with pytest.raises(ConfigError, match="segment mesh"):
            BenchCase.from_config(config)

    def test_strip_oracle_needs_strip(self, tmp_path: Path) -> None:
        path = tmp_path / "segment.toml"
        path.write_text(SEGMENT_CASE.replace('oracle = "none"\nhalf_and_entire = true\n', ""))

        with pytest.raises(ConfigError, match="strip mesh"):
            BenchCase.from_config(load_config(path))

    def test_strip_oracle_needs_trace(self, tmp_path: Path) -> None:
        path = write_strip_case(tmp_path)
        path.write_text(path.read_text().replace("[problem.boundary]\ngamma_h = [0.0, 1.0]\n", ""))

        with pytest.raises(ConfigError, match="constant trace"):
            strip_oracle(load_config(path))


@pytest.mark.formulation
class TestRunCase:
    """Tests for benchmark runs on a small strip."""

    @pytest.fixture
    def result(self, tmp_path: Path) -> BenchResult:
        case = BenchCase.from_config(load_config(write_strip_case(tmp_path, nx=8, extra=SMALL_BENCH)))
        return run_case(case)

    def test_rows(self, result: BenchResult) -> None:
        rows = list(result)

        assert [(r.method, r.order) for r in rows] == [("TMS1", 0), ("TMS1", 1), ("AMS2", 0), ("AMS2", 1)]
        assert all(r.RE is not None for r in rows)
        assert result.reference is not None
        assert result.reference.nx == 20

    def test_dofs_increase_with_order(self, result: BenchResult) -> None:
        by_method: dict[str, list[int]] = {}
        for r in result:
            by_method.setdefault(r.method, []).append(r.dofs)

        for dofs in by_method.values():
            assert dofs == sorted(set(dofs))

    def test_csv(self, result: BenchResult) -> None:
        text = result.to_csv()

        assert text.startswith("# config_sha256: ")
        header = next(line for line in text.splitlines() if not line.startswith("#"))
        assert header.split(",") == list(CSV_COLUMNS)
        rows = read_csv_rows(text)
        assert len(rows) == 4
        assert rows[0]["method"] == "TMS1"
        assert float(rows[0]["P"]) > 0

    def test_json(self, result: BenchResult) -> None:
        document = json.loads(result.to_json())

        assert set(document) == {"provenance", "reference", "published_losses", "rows"}
        assert document["reference"]["nz"] == 4
        assert len(document["rows"]) == 4


class TestDofRatio:
    """Tests for the half versus entire segment comparison."""

    def test_ratio(self) -> None:
        rows = [row("TMS1", 1, "half", 100), row("TMS1", 1, "entire", 190), row("AMS1", 1, "half", 80)]

        assert dof_ratio(rows) == {("TMS1", 1): 1.9}

    def test_no_pairs(self) -> None:
        assert dof_ratio([row("TMS1", 0, "default", 10)]) == {}

    @pytest.mark.slow
    def test_segment_run(self, tmp_path: Path) -> None:
        path = tmp_path / "segment.toml"
        path.write_text(SEGMENT_CASE)

        result = run_case(BenchCase.from_config(load_config(path)))

        ratio = dof_ratio(result.rows)[("TMS1", 0)]
        assert 1.0 < ratio <= 2.2
