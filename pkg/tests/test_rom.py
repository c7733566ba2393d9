import numpy as np
import pytest
import scipy.sparse as sp

from podnn.geometry import build_stencils, flower_domain, generate_nodes
from podnn.pod import build_snapshot_matrix, compute_pod
from podnn.rbf_fd import (
    NO_AUGMENTATION,
    HighFidelitySystem,
    RbfKernel,
    affine_compact_components,
    assemble_system,
    helmholtz_operator,
    solve_high_fidelity,
)
from podnn.rom import (
    AffineReducedModel,
    RankDeficientError,
    ReducedSystem,
    assemble_reduced,
    reduced_solution,
    solve_reduced_ls,
)

import oracles


def _identity_system(n, rhs):
    return HighFidelitySystem(sp.csr_matrix((0, n)), np.asarray(rhs, dtype=float), 0)


class TestAssembleReduced:
    def test_identity_operator_returns_basis(self, rng):
        v, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        rs = assemble_reduced(_identity_system(8, rng.standard_normal(8)), v)
        np.testing.assert_array_equal(rs.matrix, v)

    def test_single_column(self, rng):
        # interior row block of one weighted row applied to a one-column basis
        rows = sp.csr_matrix(np.array([[2.0, -1.0, 0.5]]))
        system = HighFidelitySystem(rows, np.array([1.0, 0.0, 0.0]), 1)
        v = rng.standard_normal((3, 1))
        rs = assemble_reduced(system, v)
        assert rs.matrix.shape == (3, 1)
        np.testing.assert_allclose(rs.matrix[0, 0], rows.toarray()[0] @ v[:, 0])
        np.testing.assert_array_equal(rs.matrix[1:, 0], v[1:, 0])

    def test_dimension_check(self, rng):
        with pytest.raises(ValueError):
            assemble_reduced(_identity_system(5, np.zeros(5)), rng.standard_normal((4, 2)))


class TestSolveReducedLs:
    def test_identity_block(self):
        b = np.vstack([np.eye(3), np.zeros((4, 3))])
        rhs = np.zeros(7)
        rhs[0] = 1.0
        c = solve_reduced_ls(ReducedSystem(b, rhs))
        np.testing.assert_allclose(c, [1.0, 0.0, 0.0], atol=1e-14)

    def test_orthonormal_columns(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((20, 4)))
        rhs = rng.standard_normal(20)
        c = solve_reduced_ls(ReducedSystem(q, rhs))
        np.testing.assert_allclose(c, q.T @ rhs, rtol=1e-12)

    def test_matches_normal_equations(self, rng):
        b = rng.standard_normal((50, 5))
        rhs = rng.standard_normal(50)
        c = solve_reduced_ls(ReducedSystem(b, rhs))
        np.testing.assert_allclose(c, oracles.normal_equation_lstsq(b, rhs), rtol=1e-8)

    def test_least_squares_optimality(self, rng):
        b = rng.standard_normal((30, 4))
        rhs = rng.standard_normal(30)
        c = solve_reduced_ls(ReducedSystem(b, rhs))
        base = np.linalg.norm(b @ c - rhs)
        for _ in range(100):
            delta = rng.standard_normal(4) * 10.0 ** rng.uniform(-6, 0)
            assert np.linalg.norm(b @ (c + delta) - rhs) >= base - 1e-12

    def test_residual_orthogonality(self, rng):
        b = rng.standard_normal((40, 6))
        rhs = rng.standard_normal(40)
        c = solve_reduced_ls(ReducedSystem(b, rhs))
        lhs = np.linalg.norm(b.T @ (b @ c - rhs))
        assert lhs <= 1e-8 * np.linalg.norm(b.T, 2) * np.linalg.norm(rhs)

    def test_consistent_system_solved_exactly(self, rng):
        b = rng.standard_normal((25, 3))
        c_true = rng.standard_normal(3)
        rhs = b @ c_true
        c = solve_reduced_ls(ReducedSystem(b, rhs))
        np.testing.assert_allclose(b @ c, rhs, rtol=1e-9)

    def test_rank_deficiency_error(self, rng):
        col = rng.standard_normal((10, 1))
        b = np.hstack([col, col])
        with pytest.raises(RankDeficientError) as err:
            solve_reduced_ls(ReducedSystem(b, rng.standard_normal(10)))
        assert err.value.smallest_singular is not None

    def test_conditioning_warning(self, rng):
        b = np.hstack([rng.standard_normal((12, 1)), 1e-9 * rng.standard_normal((12, 1))])
        with pytest.warns(UserWarning, match="condition"):
            solve_reduced_ls(ReducedSystem(b, rng.standard_normal(12)), rank_tol=1e-14)


class TestReducedSolution:
    def test_zero_coefficients(self, rng):
        v = rng.standard_normal((9, 3))
        np.testing.assert_array_equal(reduced_solution(v, np.zeros(3)), np.zeros(9))

    def test_unit_coefficient_selects_column(self, rng):
        v = rng.standard_normal((9, 3))
        np.testing.assert_allclose(reduced_solution(v, np.eye(3)[1]), v[:, 1])


@pytest.fixture(scope="module")
def helmholtz_rom():
    nodes = generate_nodes(flower_domain(), 30, 2000, 150, seed=21)
    stencils = build_stencils(nodes, 13)
    kern = RbfKernel(shape=3.0)
    op = helmholtz_operator(
        kern,
        forcing=lambda x, mu: -10.0 * np.sin(8.0 * x[0] * (x[1] - 1.0)),
        validate=False,
    )
    params = np.array([(a, b) for a in np.linspace(0.1, 4, 4) for b in np.linspace(0, 2, 4)])

    def solve(mu):
        return solve_high_fidelity(
            assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, mu), cond_warn=None
        )

    snaps = build_snapshot_matrix(params, solve)
    basis = compute_pod(snaps, 1e-10)
    return nodes, stencils, kern, op, snaps, basis, solve


class TestHelmholtzReduced:
    def test_reduced_matrix_finite_and_shaped(self, helmholtz_rom):
        nodes, stencils, kern, op, _, basis, _ = helmholtz_rom
        system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, (1.0, 1.0))
        rs = assemble_reduced(system, basis.basis)
        assert rs.matrix.shape == (nodes.n, basis.n_pod)
        assert np.all(np.isfinite(rs.matrix))

    def test_training_parameter_accuracy(self, helmholtz_rom):
        nodes, stencils, kern, op, snaps, basis, solve = helmholtz_rom
        for j in (0, 7, 15):
            mu = snaps.params[j]
            system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, mu)
            c = solve_reduced_ls(assemble_reduced(system, basis.basis))
            u = reduced_solution(basis.basis, c)
            truth = snaps.matrix[:, j]
            err = np.linalg.norm(u - truth) / np.linalg.norm(truth)
            assert err <= 5e-3

    def test_affine_model_matches_direct_assembly(self, helmholtz_rom):
        nodes, stencils, kern, op, _, basis, _ = helmholtz_rom
        c0, c1, c2 = affine_compact_components(nodes, stencils, kern)
        system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, (1.0, 1.0))
        model = AffineReducedModel.from_components(c0, c1, c2, system.rhs, basis.basis)
        for mu in [(0.3, 1.7), (2.5, 0.2)]:
            direct = assemble_reduced(
                assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, mu), basis.basis
            )
            fast = model.system_for(mu)
            assert np.abs(fast.matrix - direct.matrix).max() <= 1e-7 * np.abs(direct.matrix).max()
            np.testing.assert_allclose(
                solve_reduced_ls(fast), solve_reduced_ls(direct), rtol=1e-6
            )
