"""Iterative solvers and eigensolver against factorization/analytic oracles."""
import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from homogmem import fem, mesh as msh, solvers
from homogmem.errors import ConvergenceError


def laplacian_system(n, dirichlet=True):
    mesh = msh.build_unit_square_mesh(n)
    k = fem.assemble_stiffness(mesh, 1.0)
    m = fem.assemble_mass(mesh)
    if not dirichlet:
        return k, m
    k_red, _, _ = fem.apply_constraints(k, np.zeros(mesh.n_vertices), mesh,
                                        dirichlet_tags=("outer",))
    m_red, _, _ = fem.apply_constraints(m, np.zeros(mesh.n_vertices), mesh,
                                        dirichlet_tags=("outer",))
    return k_red, m_red


class TestSolveSpd:
    def test_matches_dense_factorization(self):
        k, _ = laplacian_system(10)
        rng = np.random.default_rng(7)
        b = rng.standard_normal(k.shape[0])
        x = solvers.solve_spd(k, b, tol=1e-12)
        ref = np.linalg.solve(k.toarray(), b)
        np.testing.assert_allclose(x, ref, atol=1e-9)

    def test_zero_rhs_returns_zero(self):
        k, _ = laplacian_system(4)
        x = solvers.solve_spd(k, np.zeros(k.shape[0]))
        assert (x == 0.0).all()

    def test_residual_contract(self):
        k, _ = laplacian_system(16)
        b = np.ones(k.shape[0])
        for tol in (1e-6, 1e-10, 1e-13):
            x = solvers.solve_spd(k, b, tol=tol)
            assert np.linalg.norm(b - k @ x) <= tol * np.linalg.norm(b)

    def test_iteration_cap_raises(self):
        k, _ = laplacian_system(12)
        b = np.ones(k.shape[0])
        with pytest.raises(ConvergenceError) as err:
            solvers.solve_spd(k, b, tol=1e-14, maxiter=3)
        assert err.value.residual is not None

    def test_indefinite_matrix_detected(self):
        # first search direction p = b hits p'Ap = 1 - 3 + 1 < 0
        a = sp.diags([1.0, -3.0, 1.0]).tocsr()
        with pytest.raises(ConvergenceError):
            solvers.solve_spd(a, np.array([1.0, 1.0, 1.0]))

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            solvers.solve_spd(sp.eye(3, format="csr"), np.zeros(4))

    def test_saddle_path_matches_dense(self):
        mesh = msh.periodic_pairs(msh.build_unit_square_mesh(6, label=msh.Y1))
        k = fem.assemble_stiffness(mesh, 1.0)
        b = fem.integral_weights(mesh)
        b = b - b.mean()  # compatible load for the singular operator
        k_red, b_red, _ = fem.apply_constraints(k, b, mesh, periodic=True,
                                                zero_mean=True)
        x = solvers.solve_spd(k_red, b_red, tol=1e-11, saddle=True)
        ref = np.linalg.solve(k_red.toarray(), b_red)
        np.testing.assert_allclose(x, ref, atol=1e-8)

    @given(st.integers(5, 40), st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_random_spd_systems(self, n, seed):
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((n, n))
        a = sp.csr_matrix(raw @ raw.T + n * np.eye(n))
        b = rng.standard_normal(n)
        x = solvers.solve_spd(a, b, tol=1e-12)
        np.testing.assert_allclose(x, np.linalg.solve(a.toarray(), b),
                                   atol=1e-8, rtol=1e-8)


class TestSmallestEigenpairs:
    def test_square_membrane_modes_dense_path(self):
        # lambda_mn = pi^2 (m^2 + n^2): 2, 5, 5, 8, 10, 10 times pi^2; the
        # P1 discretization error is O(lambda h^2), about 2.5% for the sixth
        # mode at n=20, and conforming approximations converge from above
        k, m = laplacian_system(20)  # 361 dofs -> dense branch
        pairs = solvers.smallest_eigenpairs(k, m, 6)
        ref = np.pi**2 * np.array([2.0, 5.0, 5.0, 8.0, 10.0, 10.0])
        np.testing.assert_allclose(pairs.values, ref, rtol=3e-2)
        assert (pairs.values >= ref - 1e-9).all()

    def test_square_membrane_modes_sparse_path(self):
        k, m = laplacian_system(40)  # 1521 dofs -> shift-invert branch
        pairs = solvers.smallest_eigenpairs(k, m, 6)
        ref = np.pi**2 * np.array([2.0, 5.0, 5.0, 8.0, 10.0, 10.0])
        np.testing.assert_allclose(pairs.values, ref, rtol=1e-2)
        assert (pairs.values >= ref - 1e-9).all()
        assert pairs.count == 6
        assert pairs.residuals.max() < 1e-8

    def test_paths_agree(self):
        k, m = laplacian_system(30)  # 841 dofs -> sparse; compare with dense
        sparse = solvers.smallest_eigenpairs(k, m, 4)
        dense_vals = scipy.linalg.eigh(k.toarray(), m.toarray(),
                                       eigvals_only=True)[:4]
        np.testing.assert_allclose(sparse.values, dense_vals, rtol=1e-8)

    def test_m_orthonormality(self):
        k, m = laplacian_system(24)
        pairs = solvers.smallest_eigenpairs(k, m, 5)
        gram = pairs.vectors.T @ (m @ pairs.vectors)
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-9)

    def test_sign_convention_nonnegative_means(self):
        k, m = laplacian_system(24)
        pairs = solvers.smallest_eigenpairs(k, m, 5)
        means = pairs.vectors.T @ (m @ np.ones(k.shape[0]))
        assert (means >= -1e-12).all()

    def test_determinism(self):
        k, m = laplacian_system(40)
        a = solvers.smallest_eigenpairs(k, m, 3)
        b = solvers.smallest_eigenpairs(k, m, 3)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.vectors, b.vectors)

    def test_argument_validation(self):
        k, m = laplacian_system(6)
        with pytest.raises(ValueError):
            solvers.smallest_eigenpairs(k, m, 0)
        with pytest.raises(ValueError):
            solvers.smallest_eigenpairs(k, m, k.shape[0] + 1)
        with pytest.raises(ValueError):
            solvers.smallest_eigenpairs(k, sp.eye(3, format="csr"), 1)
