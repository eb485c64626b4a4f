"""Cell correctors and effective tensor: structural oracles and invariants."""
import numpy as np
import pytest

from homogmem import cell, fem, mesh as msh


def solve_tensor(geom, h, n_arc=128):
    mesh = msh.periodic_pairs(msh.build_cell_mesh(geom, h, n_arc=n_arc))
    correctors = cell.solve_correctors(mesh, geom)
    return cell.effective_tensor(correctors, geom), correctors


class TestCorrectors:
    def test_no_inclusion_gives_zero_corrector(self):
        geom = msh.CellGeometry(a=0.3, b=0.15, d1=1.7)
        mesh = msh.periodic_pairs(msh.build_unit_square_mesh(12, label=msh.Y1))
        correctors = cell.solve_correctors(mesh, geom)
        for comp in correctors.components:
            assert np.abs(comp.theta).max() <= 1e-12
            assert abs(comp.multiplier) <= 1e-12
        result = cell.effective_tensor(correctors, geom)
        np.testing.assert_allclose(result.tensor, 1.7 * np.eye(2), atol=1e-10)

    def test_zero_mean(self, coarse_correctors):
        weights = fem.integral_weights(coarse_correctors.mesh)
        measure = weights.sum()
        for comp in coarse_correctors.components:
            assert abs(weights @ comp.theta) <= 1e-10 * measure

    def test_periodic_values_identical(self, coarse_correctors):
        pairs = coarse_correctors.mesh.periodic_pairs
        assert pairs
        for comp in coarse_correctors.components:
            for s, m in pairs.items():
                assert comp.theta[s] == comp.theta[m]

    def test_central_antisymmetry(self, coarse_correctors):
        # the centered inclusion makes theta(1-x) = -theta(x); the vertex set
        # is centrally symmetric by construction, so compare mirrored pairs
        y1 = coarse_correctors.mesh
        key = {tuple(k): i
               for i, k in enumerate(np.round(y1.vertices * 1e9).astype(np.int64))}
        mirrored = np.round((1.0 - y1.vertices) * 1e9).astype(np.int64)
        partner = np.array([key[tuple(k)] for k in mirrored])
        for comp in coarse_correctors.components:
            defect = np.abs(comp.theta + comp.theta[partner]).max()
            assert defect <= 1e-3 * np.abs(comp.theta).max()

    def test_resolve_is_deterministic(self, coarse_cell_mesh, ref_geom):
        a = cell.solve_corrector(coarse_cell_mesh, ref_geom, 1)
        b = cell.solve_corrector(coarse_cell_mesh, ref_geom, 1)
        assert np.abs(a.theta - b.theta).max() <= 1e-9
        assert a.residual <= 1e-10

    def test_requires_periodic_pairing(self, ref_geom):
        mesh = msh.build_cell_mesh(ref_geom, 1.0 / 24, n_arc=64)
        with pytest.raises(ValueError):
            cell.solve_corrector(mesh, ref_geom, 1)


class TestEffectiveTensor:
    def test_reference_cell_tensor_properties(self, coarse_correctors, ref_geom):
        result = cell.effective_tensor(coarse_correctors, ref_geom)
        d = result.tensor
        assert np.abs(d - d.T).max() <= 1e-10
        eigs = np.linalg.eigvalsh(d)
        assert eigs.min() > 0.0
        assert result.asymmetry <= 1e-9
        # energy bound: testing the weak form with theta itself shows D is
        # the energy Gram matrix, so no eigenvalue can exceed d1
        assert eigs.max() <= ref_geom.d1 + 1e-12
        # the arithmetic-mean bound over the perforated cell is looser still
        assert eigs.max() <= ref_geom.d1 / result.y1_measure + 1e-12

    def test_dilute_circular_hole_matches_asymptotics(self):
        f = 0.01
        radius = np.sqrt(f / np.pi)
        geom = msh.CellGeometry(a=radius, b=radius)
        result, _ = solve_tensor(geom, 1.0 / 64)
        d = result.tensor
        target = 1.0 / (1.0 + f)
        assert abs(d[0, 0] / target - 1.0) <= 0.01
        assert abs(d[1, 1] / target - 1.0) <= 0.01
        assert abs(d[0, 1]) <= 1e-8

    def test_quarter_turn_swaps_axes(self, ref_geom):
        base, _ = solve_tensor(ref_geom, 1.0 / 48)
        rotated, _ = solve_tensor(
            msh.CellGeometry(a=ref_geom.a, b=ref_geom.b,
                             angle_deg=ref_geom.angle_deg + 90.0),
            1.0 / 48,
        )
        d0, d90 = base.tensor, rotated.tensor
        assert abs(d90[0, 0] - d0[1, 1]) <= 5e-3
        assert abs(d90[1, 1] - d0[0, 0]) <= 5e-3
        assert abs(d90[0, 1] + d0[0, 1]) <= 5e-3

    def test_mesh_refinement_consistency(self, ref_geom):
        coarse, _ = solve_tensor(ref_geom, 1.0 / 24, n_arc=64)
        mid, _ = solve_tensor(ref_geom, 1.0 / 48, n_arc=128)
        fine, _ = solve_tensor(ref_geom, 1.0 / 96, n_arc=256)
        d1 = np.abs(coarse.tensor - mid.tensor).max()
        d2 = np.abs(mid.tensor - fine.tensor).max()
        assert d2 < d1

    def test_mirror_symmetric_angles_swap_offdiagonal_sign(self, ref_geom):
        plus, _ = solve_tensor(ref_geom, 1.0 / 32, n_arc=64)
        minus, _ = solve_tensor(
            msh.CellGeometry(a=ref_geom.a, b=ref_geom.b, angle_deg=-30.0),
            1.0 / 32, n_arc=64,
        )
        assert plus.tensor[0, 0] == pytest.approx(minus.tensor[0, 0], abs=1e-10)
        assert plus.tensor[1, 1] == pytest.approx(minus.tensor[1, 1], abs=1e-10)
        assert plus.tensor[0, 1] == pytest.approx(-minus.tensor[0, 1], abs=1e-10)

    def test_validation_rejects_bad_tensors(self):
        with pytest.raises(ValueError):
            cell.EffectiveTensor(
                tensor=np.array([[1.0, 0.2], [-0.2, 1.0]]),
                asymmetry=0.0, y1_measure=1.0,
            )
        with pytest.raises(ValueError):
            cell.EffectiveTensor(
                tensor=np.array([[1.0, 2.0], [2.0, 1.0]]),
                asymmetry=0.0, y1_measure=1.0,
            )
