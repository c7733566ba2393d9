import numpy as np
import pytest
import scipy.sparse as sp

from podnn.geometry import NodeSet, build_stencils, flower_domain, generate_nodes
from podnn.rbf_fd import (
    NO_AUGMENTATION,
    HighFidelitySystem,
    ParametricOperator,
    PolyAugmentation,
    RbfKernel,
    SingularStencilError,
    affine_compact_components,
    assemble_system,
    helmholtz_apply_imq,
    helmholtz_operator,
    imq_eval,
    local_interp_matrix,
    solve_high_fidelity,
    stencil_weights,
)


class TestImq:
    def test_at_zero(self):
        assert imq_eval(3.0, 0.0) == 1.0

    def test_unit_distance(self):
        np.testing.assert_allclose(imq_eval(3.0, 1.0), 1.0 / np.sqrt(10.0), rtol=1e-15)
        np.testing.assert_allclose(imq_eval(1.0, 1.0), 1.0 / np.sqrt(2.0), rtol=1e-15)

    def test_kernel_validation(self):
        with pytest.raises(ValueError):
            RbfKernel(shape=-1.0)
        with pytest.raises(ValueError):
            RbfKernel(kind="gaussian")
        with pytest.raises(ValueError):
            RbfKernel(cpd_order=1)


def _fd_reference(mu, center, x, shape, h=1e-4):
    def phi(p):
        return float(imq_eval(shape, np.hypot(p[0] - center[0], p[1] - center[1])))

    x = np.asarray(x, dtype=float)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    pxx = (phi(x + ex) - 2 * phi(x) + phi(x - ex)) / h**2
    pyy = (phi(x + ey) - 2 * phi(x) + phi(x - ey)) / h**2
    return -pxx - mu[0] * pyy - mu[1] * phi(x)


class TestHelmholtzApply:
    def test_at_center_laplacian(self):
        # -dxx - dyy of the IMQ at its center is 2*shape^2
        for eps in (1.0, 3.0):
            got = helmholtz_apply_imq((1.0, 0.0), (0.3, -0.2), (0.3, -0.2), eps)
            np.testing.assert_allclose(got, 2.0 * eps**2, rtol=1e-14)

    def test_at_center_with_mass_term(self):
        eps = 3.0
        got = helmholtz_apply_imq((0.0, 1.0), (0.0, 0.0), (0.0, 0.0), eps)
        np.testing.assert_allclose(got, eps**2 - 1.0, rtol=1e-14)

    def test_against_finite_differences_offset(self):
        got = helmholtz_apply_imq((1.0, 1.0), (0.0, 0.0), (0.1, 0.0), 3.0)
        ref = _fd_reference((1.0, 1.0), (0.0, 0.0), (0.1, 0.0), 3.0)
        np.testing.assert_allclose(got, ref, rtol=1e-6)

    def test_random_probes(self, rng):
        # the factory runs this same check internally with validate=True
        helmholtz_operator(RbfKernel(shape=3.0), validate=True)
        for _ in range(100):
            center = rng.uniform(-1, 1, 2)
            x = center + rng.uniform(-0.5, 0.5, 2)
            mu = (rng.uniform(0.1, 4), rng.uniform(0, 2))
            got = helmholtz_apply_imq(mu, center, x, 3.0)
            ref = _fd_reference(mu, center, x, 3.0)
            assert abs(got - ref) <= 1e-6 * max(1.0, abs(ref))


class TestLocalInterpMatrix:
    def test_single_point(self):
        mat = local_interp_matrix(np.array([[0.5, 0.5]]), RbfKernel(shape=2.0))
        np.testing.assert_array_equal(mat, [[1.0]])

    def test_two_points(self):
        mat = local_interp_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]), RbfKernel(shape=1.0))
        s = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(mat, [[1.0, s], [s, 1.0]], rtol=1e-15)

    def test_augmented_block_structure(self, rng):
        pts = rng.uniform(-1, 1, (3, 2))
        aug = PolyAugmentation(1)
        assert aug.q == 3
        mat = local_interp_matrix(pts, RbfKernel(shape=2.0), aug)
        assert mat.shape == (6, 6)
        np.testing.assert_array_equal(mat, mat.T)
        np.testing.assert_array_equal(mat[3:, 3:], np.zeros((3, 3)))
        # P block holds the monomials 1, x, y at the points
        np.testing.assert_allclose(mat[:3, 3], np.ones(3))
        np.testing.assert_allclose(mat[:3, 4], pts[:, 0])
        np.testing.assert_allclose(mat[:3, 5], pts[:, 1])

    def test_symmetry_random(self, rng):
        pts = rng.uniform(-1, 1, (8, 2))
        mat = local_interp_matrix(pts, RbfKernel(shape=3.0))
        np.testing.assert_array_equal(mat, mat.T)


def _multiplication_operator(factor_sign=-1.0):
    """Operator u -> -mu2 * u expressed through its action on the basis."""
    return ParametricOperator(
        apply_to_kernel=lambda c, x, mu: factor_sign * mu[1]
        * float(imq_eval(3.0, np.hypot(x[0] - c[0], x[1] - c[1]))),
        apply_to_poly=lambda e, x, mu: factor_sign * mu[1] * x[0] ** e[0] * x[1] ** e[1],
        forcing=lambda x, mu: 0.0,
        boundary=lambda x, mu: 0.0,
    )


class TestStencilWeights:
    def test_multiplication_operator_single_point(self):
        w = stencil_weights(np.array([[0.2, 0.3]]), RbfKernel(shape=3.0),
                            NO_AUGMENTATION, _multiplication_operator(), (0.0, 0.7))
        np.testing.assert_allclose(w, [-0.7], rtol=1e-14)

    def test_polynomial_reproduction_degree1(self, rng):
        kern = RbfKernel(shape=3.0)
        op = helmholtz_operator(kern, validate=False)
        mu = (1.7, 0.9)
        pts = np.vstack([[0.0, 0.0], rng.uniform(-0.3, 0.3, (7, 2))])
        w = stencil_weights(pts, kern, PolyAugmentation(1), op, mu)
        for exps in [(0, 0), (1, 0), (0, 1)]:
            vals = pts[:, 0] ** exps[0] * pts[:, 1] ** exps[1]
            expected = op.apply_to_poly(exps, pts[0], mu)
            np.testing.assert_allclose(w @ vals, expected, rtol=1e-9, atol=1e-9)

    def test_polynomial_reproduction_degree2(self, rng):
        kern = RbfKernel(shape=3.0)
        op = helmholtz_operator(kern, validate=False)
        mu = (0.5, 1.2)
        pts = np.vstack([[0.0, 0.0], rng.uniform(-0.4, 0.4, (9, 2))])
        w = stencil_weights(pts, kern, PolyAugmentation(2), op, mu)
        # exact on quadratics: e.g. L(x^2) = -2 - mu2 x^2 at the center
        for exps in [(2, 0), (0, 2), (1, 1), (1, 0), (0, 0)]:
            vals = pts[:, 0] ** exps[0] * pts[:, 1] ** exps[1]
            expected = op.apply_to_poly(exps, pts[0], mu)
            np.testing.assert_allclose(w @ vals, expected, rtol=1e-9, atol=1e-9)

    def test_interpolate_then_differentiate(self, rng):
        # weights applied to data equal the operator applied to the interpolant
        kern = RbfKernel(shape=3.0)
        op = helmholtz_operator(kern, validate=False)
        mu = (1.0, 1.0)
        pts = np.vstack([[0.0, 0.0], rng.uniform(-0.25, 0.25, (12, 2))])
        w = stencil_weights(pts, kern, NO_AUGMENTATION, op, mu)
        u = rng.standard_normal(13)
        a = local_interp_matrix(pts, kern)
        lam = np.linalg.solve(a, u)
        lphi = np.array([op.apply_to_kernel(p, pts[0], mu) for p in pts])
        np.testing.assert_allclose(w @ u, lam @ lphi, rtol=1e-8)

    def test_collinear_degree2_is_singular(self):
        pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]])
        kern = RbfKernel(shape=3.0)
        op = helmholtz_operator(kern, validate=False)
        with pytest.raises(SingularStencilError):
            stencil_weights(pts, kern, PolyAugmentation(2), op, (1.0, 1.0))

    def test_duplicate_points_singular(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.1, 0.1]])
        kern = RbfKernel(shape=3.0)
        op = helmholtz_operator(kern, validate=False)
        with pytest.raises(SingularStencilError):
            stencil_weights(pts, kern, NO_AUGMENTATION, op, (1.0, 1.0))


@pytest.fixture(scope="module")
def small_problem():
    nodes = generate_nodes(flower_domain(), 36, 2000, 164, seed=8)
    stencils = build_stencils(nodes, 13)
    kern = RbfKernel(shape=3.0)
    op = helmholtz_operator(
        kern,
        forcing=lambda x, mu: -10.0 * np.sin(8.0 * x[0] * (x[1] - 1.0)),
        validate=False,
    )
    return nodes, stencils, kern, op


class TestAssemble:
    def test_all_boundary_is_identity(self):
        nodes = generate_nodes(flower_domain(), 10, 10, 0, seed=0)
        kern = RbfKernel(shape=3.0)
        op = helmholtz_operator(kern, boundary=lambda x, mu: x[0] + x[1], validate=False)
        system = assemble_system(nodes, build_stencils(nodes, 1), kern,
                                 NO_AUGMENTATION, op, (1.0, 1.0))
        compact = system.compact_matrix()
        assert (compact != sp.eye(10, format="csr")).nnz == 0
        expected = nodes.boundary[:, 0] + nodes.boundary[:, 1]
        np.testing.assert_array_equal(system.rhs, expected)
        np.testing.assert_array_equal(solve_high_fidelity(system), expected)

    def test_single_interior_row(self, small_problem):
        nodes, _, kern, op = small_problem
        tiny = NodeSet(nodes.interior[:1], nodes.boundary[:12], seed=0)
        st = build_stencils(tiny, 5)
        system = assemble_system(tiny, st, kern, NO_AUGMENTATION, op, (1.0, 1.0))
        assert system.operator_rows.shape == (1, 13)
        assert system.operator_rows.nnz == 5
        w = stencil_weights(tiny.points[st.indices[0]], kern, NO_AUGMENTATION, op, (1.0, 1.0))
        np.testing.assert_allclose(
            system.operator_rows.toarray()[0, st.indices[0]], w, rtol=1e-7
        )

    def test_row_sparsity(self, small_problem):
        nodes, stencils, kern, op = small_problem
        system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, (2.0, 0.5))
        counts = np.diff(system.operator_rows.indptr)
        assert np.all(counts <= stencils.n_loc)

    def test_fast_path_matches_generic(self, small_problem):
        nodes, stencils, kern, op = small_problem
        mu = (1.3, 0.8)
        fast = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, mu)
        generic_op = ParametricOperator(
            apply_to_kernel=op.apply_to_kernel,
            apply_to_poly=op.apply_to_poly,
            forcing=op.forcing,
            boundary=op.boundary,
        )
        slow = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, generic_op, mu)
        diff = (fast.operator_rows - slow.operator_rows)
        scale = np.abs(fast.operator_rows).max()
        assert np.abs(diff).max() <= 1e-7 * scale
        np.testing.assert_array_equal(fast.rhs, slow.rhs)

    def test_triplet_export(self, tmp_path, small_problem):
        nodes, stencils, kern, op = small_problem
        system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, (1.0, 1.0))
        path = tmp_path / "triplets.csv"
        system.write_triplets_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "row,col,value"
        assert len(lines) == 1 + system.compact_matrix().nnz


class TestSolve:
    def test_identity_system(self, rng):
        b = rng.standard_normal(7)
        system = HighFidelitySystem(sp.csr_matrix((0, 7)), b, n_interior=0)
        np.testing.assert_array_equal(solve_high_fidelity(system), b)

    def test_manufactured_solution(self, small_problem):
        nodes, stencils, kern, _ = small_problem
        mu = (1.0, 1.0)
        op = helmholtz_operator(
            kern,
            forcing=lambda x, mu: (1.0 + mu[0] - mu[1]) * np.sin(x[0]) * np.cos(x[1]),
            boundary=lambda x, mu: np.sin(x[0]) * np.cos(x[1]),
            validate=False,
        )
        system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, mu)
        u = solve_high_fidelity(system, cond_warn=None)
        pts = nodes.points
        exact = np.sin(pts[:, 0]) * np.cos(pts[:, 1])
        err = np.linalg.norm(u - exact) / np.linalg.norm(exact)
        assert err <= 5e-2
        # boundary entries are the boundary data bitwise (identity rows)
        np.testing.assert_array_equal(u[nodes.n_interior:], system.rhs[nodes.n_interior:])

    def test_condition_estimate_warns(self, small_problem):
        nodes, stencils, kern, op = small_problem
        system = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, (1.0, 1.0))
        with pytest.warns(UserWarning, match="condition"):
            solve_high_fidelity(system, cond_warn=1.0)


class TestAffineComponents:
    def test_matches_full_assembly(self, small_problem):
        nodes, stencils, kern, op = small_problem
        c0, c1, c2 = affine_compact_components(nodes, stencils, kern)
        for mu in [(0.1, 0.0), (1.0, 1.0), (4.0, 2.0)]:
            combined = (c0 + mu[0] * c1 + mu[1] * c2).tocsr()
            full = assemble_system(nodes, stencils, kern, NO_AUGMENTATION, op, mu)
            diff = np.abs(combined[: nodes.n_interior] - full.operator_rows).max()
            assert diff <= 1e-7 * np.abs(full.operator_rows).max()

    def test_identity_block_is_exact(self, small_problem):
        nodes, stencils, kern, _ = small_problem
        c0, c1, c2 = affine_compact_components(nodes, stencils, kern)
        ni, n = nodes.n_interior, nodes.n
        bnd = c0[ni:, :].toarray()
        np.testing.assert_array_equal(bnd[:, ni:], np.eye(n - ni))
        assert c1[ni:, :].nnz == 0
        # the multiplication block is exactly -1 on the interior diagonal
        np.testing.assert_array_equal(c2.diagonal()[:ni], -np.ones(ni))
