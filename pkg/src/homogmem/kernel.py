"""Memory kernel as a filtered exponential sum from the inclusion spectrum.

The kernel chi(t) = sum_k a_k exp(-lambda_k t) collects the lowest Dirichlet
eigenpairs of the inclusion problem, weighted by squared mean values; the
unresolved tail is carried as a delta-like remainder r.  The exact algebraic
identity sum_k a_k / lambda_k + r = |Y2| / (1 - |Y2|) holds for every
truncation level because each a_k / lambda_k telescopes against r.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import fem, mesh as msh, solvers
from .mesh import CellGeometry, TriMesh


@dataclass(frozen=True)
class KernelApproximation:
    """Exponential-sum kernel with remainder.

    ``amplitudes``/``rates`` hold the kept terms (rates ascending);
    ``remainder`` is indexed by the raw truncation level ``raw_count`` and is
    not changed by filtering unless folding is requested.  ``dropped_mass``
    is the chi(0) mass removed by the filter.
    """

    amplitudes: np.ndarray
    rates: np.ndarray
    remainder: float
    remainder_raw: float
    y2_measure: float
    raw_count: int
    kept_count: int
    filter_threshold: float | None = None
    dropped_mass: float = 0.0
    y2_measure_analytic: float | None = None

    @property
    def chi0(self) -> float:
        """Kernel value at t = 0 (sum of kept amplitudes)."""
        return float(self.amplitudes.sum())

    @property
    def total_weight(self) -> float:
        """sum_k a_k / lambda_k + r, equal to |Y2| / (1 - |Y2|) unfiltered."""
        if self.amplitudes.size == 0:
            return self.remainder
        return float((self.amplitudes / self.rates).sum() + self.remainder)


def build_kernel(cell: TriMesh, geom: CellGeometry | None, m: int,
                 d2: float | None = None, tol: float = 1e-8) -> KernelApproximation:
    """Assemble the raw m-term kernel from the inclusion eigenproblem.

    ``cell`` may be a full labeled cell mesh or one already restricted to
    Y2; the Dirichlet condition is applied on the whole boundary of the Y2
    submesh.  ``d2`` defaults to the geometry's inclusion coefficient.
    """
    if m < 0:
        raise ValueError(f"term count must be >= 0, got {m}")
    if d2 is None:
        d2 = geom.d2 if geom is not None else 1.0
    if (cell.subdomain == msh.Y2).all():
        y2 = cell
    else:
        y2, _ = msh.submesh(cell, msh.Y2)
    measure = float(y2.areas.sum())
    if not 0.0 < measure < 1.0:
        raise ValueError(f"inclusion measure {measure} must lie in (0, 1)")
    prefactor = 1.0 / (1.0 - measure)
    analytic = geom.inclusion_measure if geom is not None else None

    if m == 0:
        return KernelApproximation(
            amplitudes=np.zeros(0),
            rates=np.zeros(0),
            remainder=prefactor * measure,
            remainder_raw=prefactor * measure,
            y2_measure=measure,
            raw_count=0,
            kept_count=0,
            y2_measure_analytic=analytic,
        )

    stiff = fem.assemble_stiffness(y2, d2)
    mass = fem.assemble_mass(y2)
    tags = tuple(
        sorted({msh.BOUNDARY_NAMES[int(t)] for t in np.unique(y2.boundary_tags)})
    )
    k_red, _, dofmap = fem.apply_constraints(
        stiff, np.zeros(y2.n_vertices), y2, dirichlet_tags=tags
    )
    m_red, _, _ = fem.apply_constraints(
        mass, np.zeros(y2.n_vertices), y2, dirichlet_tags=tags
    )
    pairs = solvers.smallest_eigenpairs(k_red, m_red, m, tol=tol)

    weights = fem.integral_weights(y2)
    free = dofmap.vertex_to_dof >= 0
    w_free = np.zeros(dofmap.n_dofs)
    w_free[dofmap.vertex_to_dof[free]] = weights[free]
    means = pairs.vectors.T @ w_free

    rates = pairs.values
    amplitudes = prefactor * means**2 * rates
    captured = float((means**2).sum())
    raw_remainder = prefactor * (measure - captured)
    return KernelApproximation(
        amplitudes=amplitudes,
        rates=rates,
        remainder=max(raw_remainder, 0.0),
        remainder_raw=raw_remainder,
        y2_measure=measure,
        raw_count=m,
        kept_count=m,
        y2_measure_analytic=analytic,
    )


def filter_kernel(kernel: KernelApproximation, eps: float,
                  fold: bool = False) -> KernelApproximation:
    """Drop terms with a_k < eps and record the removed chi(0) mass rho.

    The remainder is untouched by default; ``fold=True`` adds the dropped
    terms' delta weights a_k / lambda_k to it, preserving the total-weight
    identity of the unfiltered kernel.
    """
    if eps < 0.0:
        raise ValueError(f"filter threshold must be >= 0, got {eps}")
    keep = kernel.amplitudes >= eps
    dropped = float(kernel.amplitudes[~keep].sum())
    remainder = kernel.remainder
    if fold and (~keep).any():
        remainder += float(
            (kernel.amplitudes[~keep] / kernel.rates[~keep]).sum()
        )
    return replace(
        kernel,
        amplitudes=kernel.amplitudes[keep],
        rates=kernel.rates[keep],
        remainder=remainder,
        kept_count=int(keep.sum()),
        filter_threshold=eps,
        dropped_mass=dropped,
    )


def eval_kernel(kernel: KernelApproximation, t) -> np.ndarray | float:
    """chi(t) = sum_k a_k exp(-lambda_k t) for scalar or array t >= 0."""
    t_arr = np.asarray(t, dtype=float)
    if (t_arr < 0.0).any():
        raise ValueError("kernel is defined for t >= 0 only")
    if kernel.amplitudes.size == 0:
        out = np.zeros_like(t_arr)
    else:
        out = np.exp(-np.multiply.outer(t_arr, kernel.rates)) @ kernel.amplitudes
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def kernel_to_json(kernel: KernelApproximation) -> dict:
    """JSON payload with terms, remainder, and filter diagnostics."""
    return {
        "terms": [
            [float(a), float(lam)]
            for a, lam in zip(kernel.amplitudes, kernel.rates)
        ],
        "r": kernel.remainder,
        "r_raw": kernel.remainder_raw,
        "m": kernel.raw_count,
        "m_eps": kernel.kept_count,
        "epsilon": kernel.filter_threshold,
        "rho": kernel.dropped_mass,
        "chi0": kernel.chi0,
        "total_weight": kernel.total_weight,
        "y2_measure": kernel.y2_measure,
        "y2_measure_analytic": kernel.y2_measure_analytic,
    }


def kernel_from_json(data: dict) -> KernelApproximation:
    terms = np.asarray(data["terms"], dtype=float).reshape(-1, 2)
    return KernelApproximation(
        amplitudes=terms[:, 0],
        rates=terms[:, 1],
        remainder=float(data["r"]),
        remainder_raw=float(data.get("r_raw", data["r"])),
        y2_measure=float(data["y2_measure"]),
        raw_count=int(data["m"]),
        kept_count=int(data["m_eps"]),
        filter_threshold=data.get("epsilon"),
        dropped_mass=float(data.get("rho", 0.0)),
        y2_measure_analytic=data.get("y2_measure_analytic"),
    )


def save_kernel_json(kernel: KernelApproximation, path) -> None:
    with open(path, "w") as fh:
        json.dump(kernel_to_json(kernel), fh, indent=2, sort_keys=True)


def load_kernel_json(path) -> KernelApproximation:
    with open(path) as fh:
        return kernel_from_json(json.load(fh))
