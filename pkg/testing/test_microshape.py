"""Tests for the micro-shape functions and their period integrals."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from lamstack._errors import DegenerateGeometryError, InvalidArgumentError
from lamstack.microshape import PARTS, PROFILES, LaminationSpec, dphi, integral_table, phi, profile_value


class TestLaminationSpec:
    """Tests for the period geometry."""

    def test_period(self, lamination: LaminationSpec) -> None:
        assert lamination.p == pytest.approx(0.5e-3 / 0.95)
        assert lamination.d0 == pytest.approx(lamination.p - 0.5e-3)

    def test_from_d0(self) -> None:
        spec = LaminationSpec.from_d0(0.5e-3, 0.05e-3)

        assert spec.k_f == pytest.approx(0.5 / 0.55)
        assert spec.d0 == pytest.approx(0.05e-3)

    @pytest.mark.parametrize(("d", "k_f"), [(0.0, 0.9), (1e-3, 0.0), (1e-3, 1.2)])
    def test_invalid(self, d: float, k_f: float) -> None:
        with pytest.raises(InvalidArgumentError):
            LaminationSpec(d=d, k_f=k_f)


class TestPhi:
    """Tests for the micro-shape values."""

    def test_phi2_center(self, lamination: LaminationSpec) -> None:
        assert float(phi("phi2", 0.0, lamination)) == pytest.approx(-0.6123724, abs=1e-7)

    def test_phi1_sheet_surface_and_period_end(self, lamination: LaminationSpec) -> None:
        assert float(phi("phi1", lamination.d / 2, lamination)) == pytest.approx(1.0)
        assert float(phi("phi1", -lamination.d / 2, lamination)) == pytest.approx(-1.0)
        assert float(phi("phi1", lamination.p / 2, lamination)) == pytest.approx(0.0, abs=1e-12)

    def test_constant_extension(self, lamination: LaminationSpec) -> None:
        assert float(phi("phi1_0", lamination.p / 2, lamination)) == 1.0
        assert float(phi("phi1_0", -lamination.p / 2, lamination)) == -1.0
        assert float(phi("phi2", (lamination.d + lamination.p) / 4, lamination)) == 0.0

    def test_continuity_at_sheet_surface(self, lamination: LaminationSpec) -> None:
        eps = 1e-12
        for which in ("phi1_0", "phi1", "phi2"):
            inside = float(phi(which, lamination.d / 2 - eps, lamination))
            outside = float(phi(which, lamination.d / 2 + eps, lamination))
            assert inside == pytest.approx(outside, abs=1e-6)

    def test_parity(self, lamination: LaminationSpec) -> None:
        z = np.linspace(0, lamination.p / 2, 9)

        assert np.allclose(phi("phi1", -z, lamination), -phi("phi1", z, lamination))
        assert np.allclose(phi("phi2", -z, lamination), phi("phi2", z, lamination))

    def test_out_of_period(self, lamination: LaminationSpec) -> None:
        with pytest.raises(InvalidArgumentError, match="period"):
            phi("phi1", lamination.p, lamination)

    def test_unknown_function(self, lamination: LaminationSpec) -> None:
        with pytest.raises(InvalidArgumentError, match="phi1_0, phi1, phi2"):
            phi("phi3", 0.0, lamination)

    def test_no_insulation(self) -> None:
        spec = LaminationSpec(d=1e-3, k_f=1.0)

        assert float(phi("phi1", 0.5e-3, spec)) == pytest.approx(1.0)


class TestDphi:
    """Tests for the micro-shape slopes."""

    def test_phi1_slope(self, lamination: LaminationSpec) -> None:
        assert float(dphi("phi1", 0.0, lamination)) == pytest.approx(4000.0)

    def test_phi2_slope_at_center(self, lamination: LaminationSpec) -> None:
        assert float(dphi("phi2", 0.0, lamination)) == 0.0

    def test_phi1_0_in_insulation(self, lamination: LaminationSpec) -> None:
        z = 0.5 * (lamination.d + lamination.p) / 2

        assert float(dphi("phi1_0", z, lamination)) == 0.0
        assert float(dphi("phi1_0", -z, lamination)) == 0.0

    def test_phi1_slope_in_insulation(self, lamination: LaminationSpec) -> None:
        z = 0.5 * (lamination.d + lamination.p) / 2

        assert float(dphi("phi1", z, lamination)) == pytest.approx(-2.0 / lamination.d0)
        assert float(dphi("phi1", -z, lamination)) == pytest.approx(-2.0 / lamination.d0)

    def test_kink_side(self, lamination: LaminationSpec) -> None:
        z = lamination.d / 2

        assert float(dphi("phi1", z, lamination)) == pytest.approx(2.0 / lamination.d)
        assert float(dphi("phi1", z, lamination, part="insulation")) == pytest.approx(-2.0 / lamination.d0)

    def test_degenerate_insulation(self) -> None:
        with pytest.raises(DegenerateGeometryError):
            dphi("phi1", 0.0, LaminationSpec(d=1e-3, k_f=1.0), part="insulation")


class TestIntegralTable:
    """Tests for the closed-form period integrals."""

    def test_iron_entries(self, lamination: LaminationSpec) -> None:
        table = integral_table(lamination)
        d = lamination.d

        assert table.integral("iron", "phi1", "phi1") == pytest.approx(d / 3, rel=1e-13)
        assert table.integral("iron", "dphi2", "dphi2") == pytest.approx(2 / d, rel=1e-13)
        assert table.integral("iron", "phi2", "phi2") == pytest.approx(d / 5, rel=1e-13)
        assert table.integral("iron", "phi1", "phi2") == 0.0
        assert table.integral("iron", "one") == pytest.approx(d, rel=1e-14)

    def test_symmetric_lookup(self, lamination: LaminationSpec) -> None:
        table = integral_table(lamination)

        assert table.integral("insulation", "dphi1", "phi1") == table.integral("insulation", "phi1", "dphi1")

    def test_part_lengths(self, lamination: LaminationSpec) -> None:
        table = integral_table(lamination)

        assert table.integral("insulation", "one") == pytest.approx(lamination.d0, rel=1e-12)
        assert table.integral("air", "one") == pytest.approx(lamination.p, rel=1e-12)
        assert table.integral("air", "phi1_0", "phi1_0") == pytest.approx(lamination.p / 3, rel=1e-12)

    @pytest.mark.parametrize("part", PARTS)
    def test_against_quadrature(self, lamination: LaminationSpec, part: str) -> None:
        table = integral_table(lamination, verify=False)
        lo, hi = {
            "iron": (-lamination.d / 2, lamination.d / 2),
            "insulation": (lamination.d / 2, lamination.p / 2),
            "air": (-lamination.p / 2, lamination.p / 2),
        }[part]
        for i, f in enumerate(PROFILES):
            for g in PROFILES[i:]:
                def integrand(z: float, f: str = f, g: str = g) -> float:
                    return profile_value(f, part, lamination, z) * profile_value(g, part, lamination, z)  # type: ignore[arg-type]

                value, _ = quad(integrand, lo, hi, epsabs=1e-16, epsrel=1e-12)
                if part == "insulation":
                    lower, _ = quad(integrand, -hi, -lo, epsabs=1e-16, epsrel=1e-12)
                    value += lower
                expected = table.integral(part, f, g)  # type: ignore[arg-type]
                assert math.isclose(expected, value, rel_tol=1e-9, abs_tol=1e-12 * max(1.0, abs(value)))

    def test_fill_factor_one(self) -> None:
        table = integral_table(LaminationSpec(d=1e-3, k_f=1.0))

        assert table.integral("insulation", "one") == 0.0
        assert table.integral("insulation", "phi1", "phi1") == 0.0

    def test_unknown_profile(self, lamination: LaminationSpec) -> None:
        with pytest.raises(InvalidArgumentError, match="unknown profile"):
            integral_table(lamination).integral("iron", "phi3")  # type: ignore[arg-type]

    def test_as_dict(self, lamination: LaminationSpec) -> None:
        entries = integral_table(lamination).as_dict

        assert entries["iron:phi2*phi2"] == pytest.approx(1.0e-4, rel=1e-12)
        assert len(entries) == len(PARTS) * len(PROFILES) * (len(PROFILES) + 1) // 2
