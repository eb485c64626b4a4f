"""Periodic cell correctors and the effective diffusion tensor.

The corrector theta_i solves the pure-diffusion problem on the matrix part
Y1 of the cell, driven by the unit gradient e_i, with periodic conditions
on the cell frame, a natural (zero-flux) condition on the inclusion
boundary, and zero mean enforced through a Lagrange multiplier.  The
effective tensor averages the corrected gradients over Y1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem, mesh as msh, solvers
from .mesh import CellGeometry, TriMesh


@dataclass(frozen=True)
class CorrectorComponent:
    """One corrector field theta_i on the Y1 submesh."""

    direction: int
    theta: np.ndarray
    multiplier: float
    residual: float


@dataclass(frozen=True)
class CorrectorSolution:
    """Both corrector fields on a shared Y1 submesh."""

    mesh: TriMesh
    components: tuple[CorrectorComponent, CorrectorComponent]

    @property
    def theta(self) -> np.ndarray:
        """(n_vertices, 2) array with theta_1 and theta_2 as columns."""
        return np.column_stack([c.theta for c in self.components])


@dataclass(frozen=True)
class EffectiveTensor:
    """Symmetrized effective diffusion tensor with diagnostics."""

    tensor: np.ndarray
    asymmetry: float
    y1_measure: float

    def __post_init__(self):
        d = self.tensor
        if d.shape != (2, 2) or np.abs(d - d.T).max() > 1e-12 * np.abs(d).max():
            raise ValueError("effective tensor must be symmetric 2x2")
        if np.linalg.eigvalsh(d).min() <= 0.0:
            raise ValueError("effective tensor must be positive definite")


def _y1_submesh(cell: TriMesh) -> TriMesh:
    if (cell.subdomain == msh.Y1).all():
        sub = cell
    else:
        sub, _ = msh.submesh(cell, msh.Y1)
    if not sub.periodic_pairs:
        raise ValueError("cell mesh lacks periodic pairing; call periodic_pairs first")
    return sub


def solve_corrector(cell: TriMesh, geom: CellGeometry, direction: int,
                    tol: float = 1e-10) -> CorrectorComponent:
    """Solve the periodic cell problem for one unit-gradient direction.

    ``cell`` is the full cell mesh (Y1/Y2 labeled, periodic pairs filled) or
    an already-restricted Y1 mesh.  Returns nodal values on the Y1 submesh,
    the zero-mean multiplier, and the achieved relative residual.
    """
    y1 = _y1_submesh(cell)
    a = fem.assemble_stiffness(y1, geom.d1)
    b = fem.assemble_corrector_rhs(y1, direction, coeff=geom.d1)
    a_red, b_red, dofmap = fem.apply_constraints(
        a, b, y1, periodic=True, zero_mean=True
    )
    x = solvers.solve_spd(a_red, b_red, tol=tol, saddle=True)
    resid = float(
        np.linalg.norm(b_red - a_red @ x) / max(np.linalg.norm(b_red), 1e-300)
    )
    theta = dofmap.expand(x[: dofmap.n_dofs])
    return CorrectorComponent(
        direction=direction,
        theta=theta,
        multiplier=dofmap.multiplier(x),
        residual=resid,
    )


def solve_correctors(cell: TriMesh, geom: CellGeometry,
                     tol: float = 1e-10) -> CorrectorSolution:
    """Both correctors on the shared Y1 submesh."""
    y1 = _y1_submesh(cell)
    return CorrectorSolution(
        mesh=y1,
        components=(
            solve_corrector(y1, geom, 1, tol=tol),
            solve_corrector(y1, geom, 2, tol=tol),
        ),
    )


def effective_tensor(correctors: CorrectorSolution, geom: CellGeometry) -> EffectiveTensor:
    """Average corrected gradients over Y1 and symmetrize.

    D_ij = |Y1|^-1 sum_T area * d1 * (delta_ij + (grad theta_i)_j) with the
    discrete mesh measure |Y1|; the returned tensor is (D + D^T)/2 and the
    raw asymmetry max|D - D^T| is kept as a diagnostic.
    """
    mesh = correctors.mesh
    areas, grads = fem.triangle_gradients(mesh)
    measure = float(areas.sum())
    d = np.zeros((2, 2))
    for comp in correctors.components:
        i = comp.direction - 1
        grad_theta = np.einsum("tk,tkj->tj", comp.theta[mesh.triangles], grads)
        d[i] = geom.d1 * (areas @ (np.eye(2)[i][None, :] + grad_theta)) / measure
    asym = float(np.abs(d - d.T).max())
    return EffectiveTensor(tensor=0.5 * (d + d.T), asymmetry=asym, y1_measure=measure)
