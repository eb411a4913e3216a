"""Tests for the analytic lamination solution and the cross-section reference."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import Materials
from lamstack._errors import InvalidArgumentError
from lamstack._types import MU0
from lamstack.microshape import LaminationSpec
from lamstack.oracles import (
    CrossSectionProblem,
    LaminationProfile,
    cross_section_fem,
    lamination_1d,
    low_frequency_loss_density,
    skin_depth,
    strip_reference,
)

MU = MU0 * Materials.MU_R


def profile(frequency: float = Materials.FREQUENCY, h0: complex = 1000.0) -> LaminationProfile:
    return lamination_1d(h0, Materials.D, Materials.SIGMA, MU, frequency)


@pytest.mark.oracle
class TestLamination1D:
    """Tests for the infinite-sheet solution."""

    def test_skin_depth(self) -> None:
        assert skin_depth(Materials.FREQUENCY, MU, Materials.SIGMA) == pytest.approx(1.5606e-3, rel=1e-4)
        assert profile().delta == pytest.approx(1.5606e-3, rel=1e-4)

    def test_surface_value(self) -> None:
        sheet = profile()

        assert sheet.H(Materials.D / 2) == pytest.approx(1000.0)
        assert sheet.H(-Materials.D / 2) == pytest.approx(1000.0)

    def test_ode_residual(self) -> None:
        z = np.linspace(-Materials.D / 2, Materials.D / 2, 11)

        assert profile().ode_residual(z).max() < 1e-12

    def test_low_frequency_formula(self) -> None:
        assert low_frequency_loss_density(Materials.SIGMA, 50.0, 1.0, Materials.D) == pytest.approx(2138.6, rel=2e-4)

    def test_quadrature_approaches_formula(self) -> None:
        frequency = 5.0
        sheet = profile(frequency=frequency, h0=1.0 / MU)

        expected = low_frequency_loss_density(Materials.SIGMA, frequency, 1.0, Materials.D)

        assert sheet.loss_density == pytest.approx(expected, rel=0.01)

    def test_static_limit(self) -> None:
        sheet = profile(frequency=1e-6)

        assert abs(sheet.H(0.0)) == pytest.approx(1000.0, rel=1e-9)
        assert sheet.loss < 1e-12

    def test_field_drops_toward_center(self) -> None:
        sheet = profile(frequency=1000.0)

        assert abs(sheet.H(0.0)) < abs(sheet.H(Materials.D / 4)) < abs(sheet.H(Materials.D / 2))

    @pytest.mark.parametrize("name", ["d", "sigma", "mu", "frequency"])
    def test_invalid(self, name: str) -> None:
        values = {"d": Materials.D, "sigma": Materials.SIGMA, "mu": MU, "frequency": 50.0}
        values[name] = 0.0

        with pytest.raises(InvalidArgumentError, match=name):
            lamination_1d(1.0, **values)


@pytest.mark.oracle
class TestCrossSection:
    """Tests for the scalar cross-section reference."""

    @staticmethod
    def problem(width: float) -> CrossSectionProblem:
        return CrossSectionProblem(width, Materials.D, Materials.SIGMA, MU, Materials.FREQUENCY, 1000.0)

    def test_boundary_value(self) -> None:
        result = cross_section_fem(self.problem(0.005), 40, 8)

        _x, h = result.row(Materials.D / 2)
        assert np.allclose(h, 1000.0)

    def test_wide_strip_matches_lamination(self) -> None:
        width = 40 * Materials.D
        result = cross_section_fem(self.problem(width), 160, 40)
        z, h = result.column(width / 2)

        exact = profile().H(z)

        assert np.abs(h - exact).max() <= 0.01 * np.abs(exact).max()

    def test_refinement(self) -> None:
        coarse = cross_section_fem(self.problem(0.005), 50, 10).P
        medium = cross_section_fem(self.problem(0.005), 100, 20).P
        fine = cross_section_fem(self.problem(0.005), 200, 40).P

        assert abs(fine - medium) < abs(medium - coarse)
        # second order: the error shrinks by about four per halving
        assert abs(medium - coarse) / abs(fine - medium) == pytest.approx(4.0, abs=1.5)

    def test_edge_effect_share_shrinks_with_width(self) -> None:
        shares = [
            (result.P_EE / result.P)
            for result in (cross_section_fem(self.problem(w), 80, 10) for w in (0.002, 0.005, 0.01))
        ]

        assert shares[0] > shares[1] > shares[2] > 0

    def test_too_coarse(self) -> None:
        with pytest.raises(InvalidArgumentError, match="at least 4"):
            cross_section_fem(self.problem(0.005), 3, 10)

    def test_strip_reference(self) -> None:
        lamination = LaminationSpec(d=Materials.D, k_f=Materials.FILL_FACTOR)

        reference = strip_reference(0.005, lamination, Materials.SIGMA, Materials.MU_R, 50.0, 1000.0, nx=40, nz=8)

        assert reference.as_dict()["nx"] == 40
        assert reference.delta == pytest.approx(1.5606e-3, rel=1e-4)
        assert 0 < reference.P_EE_ref < reference.P_ref

    @pytest.mark.slow
    def test_reference_is_stable(self) -> None:
        lamination = LaminationSpec(d=Materials.D, k_f=Materials.FILL_FACTOR)
        args = (0.01, lamination, Materials.SIGMA, Materials.MU_R, 50.0, 1000.0)

        default = strip_reference(*args).P_ref
        fine = strip_reference(*args, nx=800, nz=80).P_ref

        assert default == pytest.approx(fine, rel=5e-3)
