"""Iterative solvers and partial generalized eigensolves.

SPD systems are solved with diagonally preconditioned conjugate gradients;
bordered zero-mean saddle systems go through MINRES with an |diag| Jacobi
preconditioner.  Smallest eigenpairs of K phi = lambda M phi come from
shift-invert ARPACK at shift 0 (dense LAPACK below a size threshold), with
deterministic start vectors and a sign convention of nonnegative mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError

_SEED = 1729
_DENSE_LIMIT = 800


@dataclass(frozen=True)
class EigenPairs:
    """Ascending eigenvalues, M-orthonormal eigenvectors, and residuals.

    ``residuals[k]`` is ||K v_k - lambda_k M v_k||_2 / max(lambda_k, 1).
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    @property
    def count(self) -> int:
        return self.values.shape[0]


def _jacobi(a: sp.spmatrix) -> np.ndarray:
    d = np.abs(a.diagonal())
    d[d == 0.0] = 1.0
    return 1.0 / d


def solve_spd(a: sp.spmatrix, b: np.ndarray, tol: float = 1e-10,
              maxiter: int | None = None, saddle: bool = False) -> np.ndarray:
    """Solve a x = b to relative residual ``tol`` in the 2-norm.

    ``saddle=True`` selects MINRES for the symmetric indefinite bordered
    system produced by the zero-mean constraint; otherwise preconditioned
    conjugate gradients.  Raises ConvergenceError when the iteration cap
    (default 10x the system size) is hit before the true residual meets
    tol * ||b||.
    """
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    if a.shape[0] != a.shape[1] or b.shape != (n,):
        raise ValueError("matrix/vector shapes are inconsistent")
    if maxiter is None:
        maxiter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)

    if saddle:
        return _solve_minres(a, b, tol, maxiter, bnorm)

    inv_d = _jacobi(a)
    x = np.zeros(n)
    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        ap = a @ p
        denom = p @ ap
        if denom <= 0.0:
            raise ConvergenceError(
                "conjugate gradients hit a nonpositive curvature direction; "
                "matrix is not positive definite",
                residual=float(np.linalg.norm(r) / bnorm),
            )
        alpha = rz / denom
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= 0.5 * tol * bnorm:
            true_r = b - a @ x
            if np.linalg.norm(true_r) <= tol * bnorm:
                return x
            r = true_r
        z = inv_d * r
        rz_next = r @ z
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise ConvergenceError(
        f"conjugate gradients did not converge in {maxiter} iterations",
        residual=float(np.linalg.norm(b - a @ x) / bnorm),
    )


def _solve_minres(a, b, tol, maxiter, bnorm):
    precond = sp.diags(_jacobi(a))

    def inner(rhs):
        try:
            sol, _ = spla.minres(a, rhs, rtol=0.1 * tol, maxiter=maxiter, M=precond)
        except TypeError:  # scipy < 1.12 spells the tolerance "tol"
            sol, _ = spla.minres(a, rhs, tol=0.1 * tol, maxiter=maxiter, M=precond)
        return sol

    # iterative refinement pushes the true residual past the single-pass
    # roundoff stall
    x = inner(b)
    rel = float(np.linalg.norm(b - a @ x) / bnorm)
    for _ in range(3):
        if rel <= tol:
            return x
        x = x + inner(b - a @ x)
        rel = float(np.linalg.norm(b - a @ x) / bnorm)
    if rel > tol:
        raise ConvergenceError(
            f"MINRES stalled at relative residual {rel:.3e} > {tol:.1e}",
            residual=rel,
        )
    return x


def _fix_signs(vectors: np.ndarray, m_weights: np.ndarray) -> np.ndarray:
    """Make each column's integral nonnegative (largest entry breaks ties)."""
    means = vectors.T @ m_weights
    out = vectors.copy()
    for k, mean in enumerate(means):
        if abs(mean) > 1e-12:
            sign = np.sign(mean)
        else:
            lead = np.argmax(np.abs(out[:, k]))
            sign = np.sign(out[lead, k]) or 1.0
        out[:, k] *= sign
    return out


def smallest_eigenpairs(k: sp.spmatrix, m: sp.spmatrix, count: int,
                        tol: float = 1e-8) -> EigenPairs:
    """Lowest ``count`` eigenpairs of K v = lambda M v, M-orthonormal."""
    n = k.shape[0]
    if k.shape != (n, n) or m.shape != (n, n):
        raise ValueError("matrices must be square and of equal size")
    if count < 1:
        raise ValueError(f"eigenpair count must be >= 1, got {count}")
    if count > n:
        raise ValueError(f"requested {count} eigenpairs of a {n}-dof system")

    if n <= _DENSE_LIMIT or count > n - 2:
        kd = k.toarray() if sp.issparse(k) else np.asarray(k, dtype=float)
        md = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
        values, vectors = scipy.linalg.eigh(kd, md, subset_by_index=(0, count - 1))
    else:
        rng = np.random.default_rng(_SEED)
        v0 = rng.standard_normal(n)
        try:
            values, vectors = spla.eigsh(
                k, k=count, M=m, sigma=0.0, which="LM", v0=v0, tol=tol * 1e-2
            )
        except spla.ArpackNoConvergence as err:
            raise ConvergenceError(f"eigensolver did not converge: {err}") from err
        order = np.argsort(values)
        values = values[order]
        vectors = vectors[:, order]

    weights = m @ np.ones(n)
    vectors = _fix_signs(vectors, weights)

    kv = k @ vectors
    mv = m @ vectors
    residuals = np.linalg.norm(kv - mv * values[None, :], axis=0) / np.maximum(
        values, 1.0
    )
    gram = vectors.T @ mv
    ortho_defect = np.abs(gram - np.eye(count)).max()
    if ortho_defect > 1e-8:
        raise ConvergenceError(
            f"eigenvectors lost M-orthonormality (defect {ortho_defect:.3e})"
        )
    if residuals.max() > tol:
        raise ConvergenceError(
            f"eigen residual {residuals.max():.3e} exceeds tol {tol:.1e}",
            residual=float(residuals.max()),
        )
    return EigenPairs(values=values, vectors=vectors, residuals=residuals)
