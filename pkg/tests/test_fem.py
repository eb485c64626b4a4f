"""P1 assembly against hand-computed elements and algebraic identities."""
import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from homogmem import fem, mesh as msh


def reference_triangle():
    """Unit right triangle (0,0)-(1,0)-(0,1) as a one-element mesh."""
    return msh.TriMesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        triangles=np.array([[0, 1, 2]]),
        subdomain=np.array([msh.OMEGA]),
        boundary_edges=np.array([[0, 1], [1, 2], [0, 2]]),
        boundary_tags=np.full(3, msh.OUTER),
    )


class TestElementMatrices:
    def test_stiffness_on_reference_triangle(self):
        k = fem.assemble_stiffness(reference_triangle(), 1.0).toarray()
        ref = np.array([
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ])
        np.testing.assert_allclose(k, ref, atol=1e-15)

    def test_mass_on_reference_triangle(self):
        m = fem.assemble_mass(reference_triangle()).toarray()
        ref = (0.5 / 12.0) * np.array([
            [2.0, 1.0, 1.0],
            [1.0, 2.0, 1.0],
            [1.0, 1.0, 2.0],
        ])
        np.testing.assert_allclose(m, ref, atol=1e-15)

    def test_anisotropic_stiffness_quadratic_form(self):
        # u = x1 + 2 x2 on the reference triangle: integral of grad.D.grad
        d = np.array([[2.0, 0.5], [0.5, 1.0]])
        mesh = reference_triangle()
        k = fem.assemble_stiffness(mesh, d).toarray()
        u = mesh.vertices @ np.array([1.0, 2.0])
        g = np.array([1.0, 2.0])
        assert u @ k @ u == pytest.approx(0.5 * g @ d @ g, rel=1e-14)


class TestAssemblyIdentities:
    def test_linear_patch_is_stiffness_nullspace_interior(self):
        mesh = msh.build_unit_square_mesh(5)
        k = fem.assemble_stiffness(mesh, 3.0)
        u = 2.0 + 3.0 * mesh.vertices[:, 0] - mesh.vertices[:, 1]
        residual = k @ u
        interior = ~np.isin(np.arange(mesh.n_vertices),
                            np.unique(mesh.boundary_edges))
        assert np.abs(residual[interior]).max() < 1e-13
        # total energy of the linear field is d * |grad u|^2 * area
        assert u @ residual == pytest.approx(3.0 * 10.0, rel=1e-13)

    def test_mass_row_sums_are_nodal_weights(self, coarse_cell_mesh):
        m = fem.assemble_mass(coarse_cell_mesh)
        w = fem.integral_weights(coarse_cell_mesh)
        np.testing.assert_allclose(np.asarray(m.sum(axis=1)).ravel(), w,
                                   atol=1e-15)
        assert w.sum() == pytest.approx(1.0, rel=1e-13)

    def test_subdomain_restriction_partitions_assembly(self, coarse_cell_mesh):
        full = fem.assemble_stiffness(coarse_cell_mesh, 2.0)
        y1 = fem.assemble_stiffness(coarse_cell_mesh, 2.0, subdomains=msh.Y1)
        y2 = fem.assemble_stiffness(coarse_cell_mesh, 2.0, subdomains=msh.Y2)
        assert abs(full - (y1 + y2)).max() < 1e-14

    def test_dict_coefficient_matches_sum_of_parts(self, coarse_cell_mesh):
        mixed = fem.assemble_stiffness(coarse_cell_mesh,
                                       {msh.Y1: 1.0, msh.Y2: 5.0})
        parts = (fem.assemble_stiffness(coarse_cell_mesh, 1.0, subdomains=msh.Y1)
                 + fem.assemble_stiffness(coarse_cell_mesh, 5.0, subdomains=msh.Y2))
        assert abs(mixed - parts).max() < 1e-14

    def test_corrector_rhs_is_minus_stiffness_times_coordinate(
            self, coarse_cell_mesh):
        # b_j(e_i) = -sum_T area d (grad phi_j)_i = -(K x_i)_j exactly
        k = fem.assemble_stiffness(coarse_cell_mesh, 1.3, subdomains=msh.Y1)
        for direction in (1, 2):
            b = fem.assemble_corrector_rhs(coarse_cell_mesh, direction,
                                           coeff=1.3, subdomains=msh.Y1)
            ref = -(k @ coarse_cell_mesh.vertices[:, direction - 1])
            np.testing.assert_allclose(b, ref, atol=1e-12)

    def test_corrector_rhs_dict_coefficient(self, coarse_cell_mesh):
        b = fem.assemble_corrector_rhs(coarse_cell_mesh, 1,
                                       coeff={msh.Y1: 1.0, msh.Y2: 4.0})
        parts = (fem.assemble_corrector_rhs(coarse_cell_mesh, 1, 1.0,
                                            subdomains=msh.Y1)
                 + fem.assemble_corrector_rhs(coarse_cell_mesh, 1, 4.0,
                                              subdomains=msh.Y2))
        np.testing.assert_allclose(b, parts, atol=1e-15)

    def test_invalid_inputs_rejected(self, coarse_cell_mesh):
        with pytest.raises(ValueError):
            fem.assemble_stiffness(coarse_cell_mesh, -1.0)
        with pytest.raises(ValueError):
            fem.assemble_stiffness(coarse_cell_mesh, np.ones((2, 3)))
        with pytest.raises(ValueError):
            fem.assemble_stiffness(coarse_cell_mesh,
                                   np.array([[1.0, 0.5], [-0.5, 1.0]]))
        with pytest.raises(ValueError):
            fem.assemble_stiffness(coarse_cell_mesh,
                                   np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValueError):
            fem.assemble_corrector_rhs(coarse_cell_mesh, 3)
        with pytest.raises(ValueError):
            fem.assemble_corrector_rhs(coarse_cell_mesh, 1, coeff=0.0)
        with pytest.raises(ValueError):
            fem.assemble_stiffness(coarse_cell_mesh, 1.0, subdomains=9)


class TestConstraints:
    def test_dirichlet_poisson_matches_dense_reference(self):
        mesh = msh.build_unit_square_mesh(8)
        k = fem.assemble_stiffness(mesh, 1.0)
        b = fem.integral_weights(mesh)  # load f = 1
        k_red, b_red, dofmap = fem.apply_constraints(
            k, b, mesh, dirichlet_tags=("outer",)
        )
        x = np.linalg.solve(k_red.toarray(), b_red)
        full = dofmap.expand(x)
        # dense reference: delete rows/cols by hand
        boundary = np.unique(mesh.boundary_edges)
        free = np.setdiff1d(np.arange(mesh.n_vertices), boundary)
        ref = np.zeros(mesh.n_vertices)
        ref[free] = np.linalg.solve(k.toarray()[np.ix_(free, free)], b[free])
        np.testing.assert_allclose(full, ref, atol=1e-12)
        assert (full[boundary] == 0.0).all()

    def test_periodic_folding_reduces_size(self, coarse_cell_mesh):
        k = fem.assemble_stiffness(coarse_cell_mesh, 1.0)
        b = np.zeros(coarse_cell_mesh.n_vertices)
        k_red, _, dofmap = fem.apply_constraints(k, b, coarse_cell_mesh,
                                                 periodic=True)
        n_slaves = len(coarse_cell_mesh.periodic_pairs)
        assert dofmap.n_dofs == coarse_cell_mesh.n_vertices - n_slaves
        assert k_red.shape == (dofmap.n_dofs, dofmap.n_dofs)
        # folded matrix keeps the constant-vector nullspace
        ones = np.ones(dofmap.n_dofs)
        assert np.abs(k_red @ ones).max() < 1e-12

    def test_zero_mean_border_row_is_normalized_weights(self):
        mesh = msh.build_unit_square_mesh(4, label=msh.Y1)
        mesh = msh.periodic_pairs(mesh)
        k = fem.assemble_stiffness(mesh, 1.0)
        b = np.zeros(mesh.n_vertices)
        k_red, b_red, dofmap = fem.apply_constraints(
            k, b, mesh, periodic=True, zero_mean=True
        )
        assert dofmap.multiplier_index == dofmap.n_dofs
        assert k_red.shape == (dofmap.n_dofs + 1, dofmap.n_dofs + 1)
        border = k_red.toarray()[-1, :-1]
        assert np.linalg.norm(border) == pytest.approx(1.0, rel=1e-12)
        assert b_red[-1] == 0.0
        # undoing the normalization recovers the patch integrals (sum = |Y|)
        assert border.sum() * dofmap.multiplier_scale == pytest.approx(1.0)

    def test_expand_restrict_roundtrip(self, coarse_cell_mesh):
        k = fem.assemble_stiffness(coarse_cell_mesh, 1.0)
        b = np.zeros(coarse_cell_mesh.n_vertices)
        _, _, dofmap = fem.apply_constraints(k, b, coarse_cell_mesh,
                                             periodic=True)
        x = np.sin(np.arange(dofmap.n_dofs))
        assert np.array_equal(dofmap.restrict(dofmap.expand(x)), x)
        full = dofmap.expand(x)
        for s, m in coarse_cell_mesh.periodic_pairs.items():
            assert full[s] == full[m]

    def test_multiplier_requires_border(self, coarse_cell_mesh):
        k = fem.assemble_stiffness(coarse_cell_mesh, 1.0)
        _, _, dofmap = fem.apply_constraints(
            k, np.zeros(coarse_cell_mesh.n_vertices), coarse_cell_mesh,
            periodic=True,
        )
        with pytest.raises(ValueError):
            dofmap.multiplier(np.zeros(dofmap.n_dofs))

    def test_unknown_tag_rejected(self, coarse_cell_mesh):
        k = fem.assemble_stiffness(coarse_cell_mesh, 1.0)
        with pytest.raises(ValueError):
            fem.apply_constraints(k, np.zeros(coarse_cell_mesh.n_vertices),
                                  coarse_cell_mesh, dirichlet_tags=("lid",))

    def test_periodic_without_pairs_rejected(self):
        mesh = msh.build_unit_square_mesh(3)
        k = fem.assemble_stiffness(mesh, 1.0)
        with pytest.raises(ValueError):
            fem.apply_constraints(k, np.zeros(mesh.n_vertices), mesh,
                                  periodic=True)

    def test_shape_mismatch_rejected(self):
        mesh = msh.build_unit_square_mesh(3)
        with pytest.raises(ValueError):
            fem.apply_constraints(sp.eye(5, format="csr"), np.zeros(5), mesh)


class TestExport:
    def test_matrix_market_roundtrip(self, tmp_path):
        mesh = msh.build_unit_square_mesh(3)
        k = fem.assemble_stiffness(mesh, 1.0)
        path = tmp_path / "k.mtx"
        fem.export_matrix_market(k, path)
        back = scipy.io.mmread(path)
        assert abs(back.tocsr() - k).max() < 1e-15
