"""Macroscale time stepping for homogenized diffusion with memory.

The nonlocal-in-time model is replaced by an extended local system: one
auxiliary field w_k per kernel term evolves alongside the solution y, and
the w_k are eliminated from the weighted two-level (sigma) scheme so that
every step solves a single SPD system

    [(1 + r + sigma*tau*alpha) M + sigma*tau*K] y^{n+1} = rhs(y^n, w^n),

with alpha = sum_k a_k / (1 + sigma*lambda_k*tau).  The discrete energy
y'Ky + sum_k a_k w_k' M w_k is non-increasing for sigma >= 1/2.  A direct
Volterra integrator over the full history is kept as an independent
reference for convergence studies.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import fem, solvers
from .kernel import KernelApproximation
from .mesh import TriMesh

_HISTORY_LIMIT = 100_000


@dataclass(frozen=True)
class MacroProblem:
    """Initial-boundary-value problem on the macro mesh.

    ``u0(x1, x2)`` is a vectorized initial condition; homogeneous Dirichlet
    data is imposed on boundary edges tagged "outer".  ``sigma`` weights the
    two time levels: 1 is implicit Euler, 1/2 is the symmetric scheme, and
    values below 1/2 are only conditionally stable.
    """

    mesh: TriMesh
    tensor: np.ndarray
    kernel: KernelApproximation
    u0: Callable[[np.ndarray, np.ndarray], np.ndarray]
    tau: float
    t_end: float
    sigma: float = 1.0
    solver_tol: float = 1e-12

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"time step must be positive, got {self.tau}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")
        if self.t_end < 0.0:
            raise ValueError(f"final time must be >= 0, got {self.t_end}")

    @property
    def conditionally_stable(self) -> bool:
        return self.sigma < 0.5

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.tau))


class _StepOperator:
    """Matrices and scalar coefficients shared by every step."""

    def __init__(self, problem: MacroProblem):
        mesh = problem.mesh
        ker = problem.kernel
        stiff = fem.assemble_stiffness(mesh, problem.tensor)
        mass = fem.assemble_mass(mesh)
        self.stiffness, _, self.dofmap = fem.apply_constraints(
            stiff, np.zeros(mesh.n_vertices), mesh, dirichlet_tags=("outer",)
        )
        self.mass, _, _ = fem.apply_constraints(
            mass, np.zeros(mesh.n_vertices), mesh, dirichlet_tags=("outer",)
        )
        sig, tau = problem.sigma, problem.tau
        self.sigma = sig
        self.tau = tau
        self.rates = ker.rates
        self.amplitudes = ker.amplitudes
        self.gains = ker.amplitudes / (1.0 + sig * tau * ker.rates)
        alpha = float(self.gains.sum())
        self.mass_weight = 1.0 + ker.remainder + sig * tau * alpha
        self.step_matrix = (self.mass_weight * self.mass
                            + sig * tau * self.stiffness).tocsr()
        self.w_decay = (1.0 - (1.0 - sig) * tau * ker.rates) / (
            1.0 + sig * tau * ker.rates
        )
        self.w_gain = 1.0 / (1.0 + sig * tau * ker.rates)
        self.tol = problem.solver_tol


@dataclass
class MacroState:
    """Time level n: solution dofs y and auxiliary fields w_k (rows of w)."""

    y: np.ndarray
    w: np.ndarray
    n: int
    ops: _StepOperator = field(repr=False)

    @property
    def t(self) -> float:
        return self.n * self.ops.tau


def _project_initial(problem: MacroProblem, ops: _StepOperator) -> np.ndarray:
    """L2 projection of u0 via the mass system and a 3-midpoint edge rule."""
    mesh = problem.mesh
    p = mesh.vertices[mesh.triangles]
    mids = 0.5 * (p + np.roll(p, -1, axis=1))  # midpoints of edges 01, 12, 20
    vals = problem.u0(mids[:, :, 0], mids[:, :, 1])
    # phi_v is 1/2 on the two midpoints of edges touching v, 0 opposite
    contrib = np.empty((mesh.n_triangles, 3))
    contrib[:, 0] = vals[:, 0] + vals[:, 2]
    contrib[:, 1] = vals[:, 0] + vals[:, 1]
    contrib[:, 2] = vals[:, 1] + vals[:, 2]
    contrib *= (mesh.areas / 6.0)[:, None]
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.triangles.ravel(), contrib.ravel())
    free = ops.dofmap.vertex_to_dof >= 0
    b_red = np.zeros(ops.dofmap.n_dofs)
    np.add.at(b_red, ops.dofmap.vertex_to_dof[free], b[free])
    return solvers.solve_spd(ops.mass, b_red, tol=ops.tol)


def init_state(problem: MacroProblem) -> MacroState:
    """Project the initial condition and zero the auxiliary fields."""
    if problem.conditionally_stable:
        warnings.warn(
            f"sigma={problem.sigma} < 1/2 is only conditionally stable",
            stacklevel=2,
        )
    ops = _StepOperator(problem)
    y0 = _project_initial(problem, ops)
    w0 = np.zeros((problem.kernel.amplitudes.size, ops.dofmap.n_dofs))
    return MacroState(y=y0, w=w0, n=0, ops=ops)


def step(state: MacroState, problem: MacroProblem) -> MacroState:
    """Advance one time level of the eliminated extended system."""
    ops = state.ops
    sig, tau = problem.sigma, problem.tau
    rhs = ops.mass_weight * (ops.mass @ state.y)
    if sig < 1.0:
        rhs -= (1.0 - sig) * tau * (ops.stiffness @ state.y)
    if state.w.size:
        rhs -= tau * (ops.mass @ (ops.gains @ state.w))
    y_next = solvers.solve_spd(ops.step_matrix, rhs, tol=ops.tol)
    if state.w.size:
        dy = y_next - state.y
        w_next = ops.w_decay[:, None] * state.w + ops.w_gain[:, None] * dy[None, :]
    else:
        w_next = state.w
    return MacroState(y=y_next, w=w_next, n=state.n + 1, ops=ops)


def energy(state: MacroState) -> float:
    """Discrete energy y'Ky + sum_k a_k w_k' M w_k at the current level."""
    ops = state.ops
    total = float(state.y @ (ops.stiffness @ state.y))
    if state.w.size:
        mw = ops.mass @ state.w.T
        total += float(ops.amplitudes @ np.einsum("kn,nk->k", state.w, mw))
    return total


def l2_norm(state: MacroState) -> float:
    return float(np.sqrt(state.y @ (state.ops.mass @ state.y)))


@dataclass(frozen=True)
class RunResult:
    """Trajectory summaries from run(): series are indexed by time level."""

    times: np.ndarray
    energies: np.ndarray
    l2_norms: np.ndarray
    snapshots: tuple[tuple[float, np.ndarray], ...]
    final: MacroState
    trajectory: np.ndarray | None = None

    @property
    def initial_energy(self) -> float:
        return float(self.energies[0])

    @property
    def final_energy(self) -> float:
        return float(self.energies[-1])


def run(problem: MacroProblem, snapshot_times=(), store_trajectory: bool = False) -> RunResult:
    """March from t=0 to t_end recording energy and L2 norm every level.

    ``snapshot_times`` are rounded to the nearest time level; snapshots are
    full nodal vectors (zeros on the Dirichlet boundary).
    """
    n_steps = problem.n_steps
    state = init_state(problem)
    snap_levels = {}
    for t_req in snapshot_times:
        lvl = int(round(t_req / problem.tau))
        if not 0 <= lvl <= n_steps:
            raise ValueError(f"snapshot time {t_req} outside [0, {problem.t_end}]")
        snap_levels.setdefault(lvl, t_req)

    energies = np.empty(n_steps + 1)
    norms = np.empty(n_steps + 1)
    energies[0] = energy(state)
    norms[0] = l2_norm(state)
    snapshots = []
    traj = [state.y.copy()] if store_trajectory else None
    if 0 in snap_levels:
        snapshots.append((0.0, state.ops.dofmap.expand(state.y)))
    for n in range(1, n_steps + 1):
        state = step(state, problem)
        energies[n] = energy(state)
        norms[n] = l2_norm(state)
        if traj is not None:
            traj.append(state.y.copy())
        if n in snap_levels:
            snapshots.append((n * problem.tau, state.ops.dofmap.expand(state.y)))
    return RunResult(
        times=np.arange(n_steps + 1) * problem.tau,
        energies=energies,
        l2_norms=norms,
        snapshots=tuple(snapshots),
        final=state,
        trajectory=np.asarray(traj) if traj is not None else None,
    )


def volterra_reference(problem: MacroProblem, tau: float | None = None) -> np.ndarray:
    """Integrate the Volterra form directly as an independent reference.

    The memory term (chi * du/dt)(t) is integrated exactly over each past
    interval for the piecewise-constant increment representation of du/dt
    (product integration), and the equation is enforced at the same sigma
    weighting as the extended scheme.  The full increment history is kept;
    beyond 100000 levels the call refuses.  Returns the dof trajectory with
    shape (n_steps + 1, n_dofs).
    """
    tau = problem.tau if tau is None else tau
    if tau <= 0.0:
        raise ValueError(f"time step must be positive, got {tau}")
    n_steps = int(round(problem.t_end / tau))
    if n_steps > _HISTORY_LIMIT:
        raise ValueError(
            f"{n_steps} history levels exceed the limit of {_HISTORY_LIMIT}"
        )
    ops = _StepOperator(problem)
    sig = problem.sigma
    ker = problem.kernel
    a_k = ker.amplitudes
    lam = ker.rates
    r = ker.remainder

    y = _project_initial(problem, ops)
    n_dofs = y.shape[0]
    traj = np.empty((n_steps + 1, n_dofs))
    traj[0] = y
    increments = np.empty((n_steps, n_dofs))

    # integral of each exponential over one step; beta weights the unknown
    # increment, decay powers weight the stored history
    decay = np.exp(-lam * tau)
    unit_mass = (a_k / lam) * (1.0 - decay) if a_k.size else np.zeros(0)
    beta = float(unit_mass.sum())
    lhs = ((1.0 + r + sig * beta) * ops.mass + sig * tau * ops.stiffness).tocsr()

    for n in range(n_steps):
        hist = np.zeros(n_dofs)
        if a_k.size and n > 0:
            ages = np.arange(n - 1, -1, -1, dtype=float)  # n-1-j for j=0..n-1
            powers = np.exp(-np.multiply.outer(lam * tau, ages))
            w_at_n = unit_mass @ powers
            w_at_np1 = (unit_mass * decay) @ powers
            hist = (sig * w_at_np1 + (1.0 - sig) * w_at_n) @ increments[:n] / tau
        rhs = (1.0 + r + sig * beta) * (ops.mass @ y)
        rhs -= (1.0 - sig) * tau * (ops.stiffness @ y)
        rhs -= tau * (ops.mass @ hist)
        y_next = solvers.solve_spd(lhs, rhs, tol=ops.tol)
        increments[n] = y_next - y
        traj[n + 1] = y_next
        y = y_next
    return traj
