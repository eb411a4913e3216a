"""Tests for the sparse solvers."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from conftest import Materials
from lamstack._errors import ConvergenceError, InvalidArgumentError, SingularMatrixError
from lamstack._types import MethodId
from lamstack.formulations import assemble_msfem, bc_apply, strip_problem
from lamstack.linsolve import (
    bicgstab,
    factorize,
    read_matrix_market,
    solve,
    solve_augmented,
    solve_linear,
    write_matrix_market,
)
from lamstack.microshape import LaminationSpec


def laplacian(n: int, shift: complex = 0.0) -> sparse.csr_matrix:
    main = np.full(n, 2.0 + shift, dtype=np.complex128)
    off = -np.ones(n - 1)
    return sparse.diags([off, main, off], [-1, 0, 1], format="csr")


class TestDirect:
    """Tests for the LU path."""

    def test_identity(self) -> None:
        b = np.array([1.0, 2j, -3.0])

        assert np.allclose(solve(sparse.identity(3), b), b)

    def test_complex_symmetric(self) -> None:
        a = np.array([[2.0, 1j], [1j, 1.0]])
        b = np.array([1.0, 1.0 - 1j])

        assert np.allclose(solve(sparse.csr_matrix(a), b), np.linalg.solve(a, b), rtol=1e-12, atol=0)

    def test_zero_rhs(self) -> None:
        x = solve(laplacian(5), np.zeros(5))

        assert x.dtype == np.complex128
        assert not x.any()

    def test_linearity(self) -> None:
        factors = factorize(laplacian(20, shift=0.5j))
        rng = np.random.default_rng(7)
        b1 = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        b2 = rng.standard_normal(20)

        combined = solve_linear(factors, 2 * b1 - 3j * b2)

        assert np.allclose(combined, 2 * solve_linear(factors, b1) - 3j * solve_linear(factors, b2))

    def test_factor_reuse(self) -> None:
        a = laplacian(30, shift=1j)
        factors = factorize(a)

        for k in range(3):
            b = np.arange(30, dtype=np.complex128) * (k + 1)
            x = solve_linear(factors, b)
            assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)
        assert factors.n == 30
        assert factors.nnz >= a.nnz

    def test_singular_reports_index(self) -> None:
        a = sparse.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))

        with pytest.raises(SingularMatrixError) as excinfo:
            factorize(a)

        assert excinfo.value.index == 1
        assert "index 1" in str(excinfo.value)

    def test_non_square(self) -> None:
        with pytest.raises(InvalidArgumentError, match="square"):
            factorize(sparse.csr_matrix(np.ones((2, 3))))

    def test_rhs_shape(self) -> None:
        with pytest.raises(InvalidArgumentError, match="expected"):
            solve(laplacian(4), np.ones(3))


class TestBicgstab:
    """Tests for the iterative path."""

    def test_identity(self) -> None:
        b = np.array([1.0, -1j, 0.5])
        result = bicgstab(sparse.identity(3), b)

        assert np.allclose(result.x, b)
        assert result.history[-1] <= 1e-10

    def test_agrees_with_direct(self) -> None:
        a = laplacian(40, shift=0.2j)
        b = np.ones(40, dtype=np.complex128)

        result = bicgstab(a, b, tol=1e-12)

        assert np.allclose(result.x, solve(a, b), rtol=1e-8, atol=1e-10)

    def test_zero_rhs(self) -> None:
        result = bicgstab(laplacian(5), np.zeros(5))

        assert result.iterations == 0
        assert not result.x.any()

    def test_maxit_exhausted(self) -> None:
        with pytest.raises(ConvergenceError) as excinfo:
            bicgstab(laplacian(50), np.ones(50), tol=1e-12, maxit=1)

        assert excinfo.value.history
        assert "iterations" in str(excinfo.value)

    def test_bad_tolerance(self) -> None:
        with pytest.raises(InvalidArgumentError, match="tolerance"):
            bicgstab(laplacian(3), np.ones(3), tol=0.0)

    def test_assembled_strip_system(self, lamination: LaminationSpec) -> None:
        problem = strip_problem(MethodId.TMS1, width=0.01, height=0.001, lamination=lamination,
                                sigma=Materials.SIGMA, mu_r=Materials.MU_R, frequency=Materials.FREQUENCY,
                                h0=1000.0, nx=10, edge_order=0, curl_free=False, curl_penalty=1e-8)
        system = bc_apply(assemble_msfem(problem), problem.mesh, problem.config)
        direct = solve(system.matrix, system.rhs)

        result = bicgstab(system.matrix, system.rhs, tol=1e-9, maxit=5000)

        assert np.allclose(result.x, direct, rtol=0, atol=1e-6 * np.abs(direct).max())


class TestMatrixMarket:
    """Tests for the Matrix Market export."""

    def test_round_trip(self) -> None:
        a = laplacian(6, shift=0.25j)
        buffer = io.BytesIO()

        write_matrix_market(buffer, a)
        buffer.seek(0)
        back = read_matrix_market(buffer)

        assert abs(back - a).max() == 0.0

    def test_symmetric_header(self, tmp_path: Path) -> None:
        target = tmp_path / "a.mtx"

        write_matrix_market(str(target), laplacian(4))

        assert "complex symmetric" in target.read_text().splitlines()[0]


class TestAugmented:
    """Tests for the method of multipliers."""

    GAMMA = 10.0

    def test_equal_unknowns(self) -> None:
        a = sparse.diags([1.0, 2.0, 4.0])
        coupling = sparse.csr_matrix(np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))
        factors = factorize(a + self.GAMMA * coupling)

        result = solve_augmented(factors, np.ones(3), coupling, gamma=self.GAMMA)

        assert np.allclose(result.x, [2 / 3, 2 / 3, 1 / 4], rtol=0, atol=1e-9)
        assert result.history[-1] <= 1e-10
        assert result.residual <= 1e-10

    def test_result_independent_of_weight(self) -> None:
        a = sparse.diags([1.0, 2.0, 4.0])
        coupling = sparse.csr_matrix(np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))

        light = solve_augmented(factorize(a + coupling), np.ones(3), coupling, gamma=1.0)
        heavy = solve_augmented(factorize(a + 1e4 * coupling), np.ones(3), coupling, gamma=1e4)

        assert np.allclose(light.x, heavy.x, rtol=0, atol=1e-9)
        assert heavy.iterations < light.iterations

    def test_fixed_rows_keep_their_values(self) -> None:
        g = self.GAMMA
        # x2 is eliminated at 5, the constraint couples x1 and x2
        eliminated = sparse.diags([1.0, 2.0 + g, 1.0])
        coupling = sparse.csr_matrix(np.array([[0.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, -1.0, 1.0]]))
        rhs = np.array([1.0, 1.0 + 5.0 * g, 5.0])

        result = solve_augmented(
            factorize(eliminated), rhs, coupling, gamma=g, free=np.array([True, True, False])
        )

        assert np.allclose(result.x, [1.0, 5.0, 5.0], rtol=0, atol=1e-9)

    def test_stalls(self) -> None:
        a = sparse.diags([1.0, 2.0, 4.0])
        coupling = sparse.csr_matrix(np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))

        with pytest.raises(ConvergenceError, match="constraint update stalled") as excinfo:
            solve_augmented(factorize(a + coupling), np.ones(3), coupling, gamma=1.0, tol=1e-300, maxit=1)

        assert len(excinfo.value.history) == 1

    @pytest.mark.parametrize(
        ("options", "message"), [({"gamma": 0.0}, "augmentation"), ({"gamma": 1.0, "tol": 0.0}, "tolerance")]
    )
    def test_bad_arguments(self, options: dict[str, float], message: str) -> None:
        with pytest.raises(InvalidArgumentError, match=message):
            solve_augmented(factorize(sparse.identity(2)), np.ones(2), sparse.identity(2), **options)
