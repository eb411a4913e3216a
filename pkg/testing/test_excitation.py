"""Tests for the conductor source field."""

from __future__ import annotations

import math

import numpy as np
import pytest

from lamstack._errors import InvalidArgumentError
from lamstack.excitation import ConductorSpec, biot_savart_H, check_conductors, circulation, j0_density

RADIUS = 2e-3
CURRENT = 100.0


@pytest.fixture
def single() -> list[ConductorSpec]:
    return [ConductorSpec(center=(0.0, 0.0), radius=RADIUS, current=CURRENT)]


def square(half: float, center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    cx, cy = center
    return np.array(
        [
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
            [cx - half, cy - half],
        ]
    )


class TestBiotSavart:
    """Tests for the field of straight round conductors."""

    def test_zero_at_center(self, single: list[ConductorSpec]) -> None:
        assert np.abs(biot_savart_H(single, [0.0, 0.0])).max() == 0.0

    def test_surface_magnitude(self, single: list[ConductorSpec]) -> None:
        h = biot_savart_H(single, [RADIUS, 0.0])

        assert abs(h[1]) == pytest.approx(7957.747, rel=1e-6)
        assert abs(h[0]) == pytest.approx(0.0, abs=1e-9)

    def test_counter_clockwise(self, single: list[ConductorSpec]) -> None:
        h = biot_savart_H(single, [[0.01, 0.0], [0.0, 0.01]])

        assert h[0, 1].real > 0
        assert h[1, 0].real < 0

    def test_linear_inside_and_decay_outside(self, single: list[ConductorSpec]) -> None:
        inside = np.abs(biot_savart_H(single, [RADIUS / 2, 0.0])[1])
        outside = np.abs(biot_savart_H(single, [2 * RADIUS, 0.0])[1])

        assert inside == pytest.approx(outside)
        assert inside == pytest.approx(CURRENT / (4 * math.pi * RADIUS))

    def test_antiparallel_pair(self) -> None:
        a = 0.01
        pair = [
            ConductorSpec(center=(-a, 0.0), radius=RADIUS, current=CURRENT),
            ConductorSpec(center=(a, 0.0), radius=RADIUS, current=-CURRENT),
        ]
        h = biot_savart_H(pair, [0.0, 0.0])

        assert h[0] == pytest.approx(0.0, abs=1e-9)
        assert h[1].real == pytest.approx(CURRENT / (math.pi * a))

    def test_complex_current(self) -> None:
        spec = [ConductorSpec(center=(0.0, 0.0), radius=RADIUS, current=CURRENT * 1j)]
        h = biot_savart_H(spec, [0.01, 0.0])

        assert h[1].real == pytest.approx(0.0)
        assert h[1].imag == pytest.approx(CURRENT / (2 * math.pi * 0.01))

    def test_bad_points(self, single: list[ConductorSpec]) -> None:
        with pytest.raises(InvalidArgumentError, match="two coordinates"):
            biot_savart_H(single, [1.0, 2.0, 3.0])


class TestCurrentDensity:
    """Tests for the impressed current density."""

    def test_inside(self, single: list[ConductorSpec]) -> None:
        assert j0_density(single, [0.0, 0.0]).real == pytest.approx(7.9577e6, rel=1e-4)

    def test_outside(self, single: list[ConductorSpec]) -> None:
        assert j0_density(single, [0.01, 0.0]) == 0.0

    def test_total_current(self, single: list[ConductorSpec]) -> None:
        assert single[0].density * single[0].area == pytest.approx(CURRENT)


class TestCirculation:
    """Tests for Ampere's law on closed loops."""

    def test_enclosing_loop(self, single: list[ConductorSpec]) -> None:
        assert circulation(single, square(0.01)) == pytest.approx(CURRENT, rel=1e-8)

    def test_loop_beside_conductor(self, single: list[ConductorSpec]) -> None:
        assert abs(circulation(single, square(0.003, center=(0.02, 0.0)))) < 1e-8 * CURRENT

    def test_enclosing_both_of_a_pair(self) -> None:
        pair = [
            ConductorSpec(center=(-0.01, 0.0), radius=RADIUS, current=CURRENT),
            ConductorSpec(center=(0.01, 0.0), radius=RADIUS, current=-CURRENT),
        ]

        assert abs(circulation(pair, square(0.03))) < 1e-8 * CURRENT

    def test_open_loop(self, single: list[ConductorSpec]) -> None:
        with pytest.raises(InvalidArgumentError, match="open"):
            circulation(single, square(0.01)[:-1])


class TestConductorSpec:
    """Tests for conductor validation."""

    def test_non_positive_radius(self) -> None:
        with pytest.raises(InvalidArgumentError, match="radius"):
            ConductorSpec(center=(0.0, 0.0), radius=0.0, current=1.0)

    def test_overlap(self) -> None:
        with pytest.raises(InvalidArgumentError, match="overlap"):
            check_conductors(
                [
                    ConductorSpec(center=(0.0, 0.0), radius=RADIUS, current=1.0),
                    ConductorSpec(center=(RADIUS, 0.0), radius=RADIUS, current=-1.0),
                ]
            )

    def test_touching_is_allowed(self) -> None:
        check_conductors(
            [
                ConductorSpec(center=(0.0, 0.0), radius=RADIUS, current=1.0),
                ConductorSpec(center=(2 * RADIUS, 0.0), radius=RADIUS, current=-1.0),
            ]
        )
