"""Tracking cost, admissible-set projection, reduced gradient, and
projected gradient descent with Armijo backtracking.

The reduced problem is

    minimize J(u) = (b1/2) int_Q |phi(u) - phi_Q|^2
                  + (b2/2) int_Om |phi(u)(T) - phi_Om|^2
                  + (b3/2) int_Q |u|^2
    over the box  0 <= u <= u_max,

with the state phi(u) produced by the forward solver. The gradient of J
as a function of the control alone is p3 + b3*u, with p3 the third
adjoint component; the necessary optimality condition is the pointwise
projection identity u* = P(-p3/b3), whose defect is the stationarity
residual used as the stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as g
from .adjoint import AdjointTrajectory, ControlSpec, solve_adjoint
from .grid import Grid
from .state import Control, InitialData, ModelSpec, StateTrajectory, solve_forward


@dataclass
class OptimizeOptions:
    tol_stat: float = 1e-6
    max_iters: int = 200
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    s_stab: float | None = None
    flux_scheme: str = "centered"


@dataclass
class OptimizeResult:
    u_star: Control
    cost_history: list[float] = field(default_factory=list)
    stationarity_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    step_sizes: list[float] = field(default_factory=list)
    backtrack_counts: list[int] = field(default_factory=list)
    message: str = ""
    trajectory: StateTrajectory | None = None
    adjoint: AdjointTrajectory | None = None


def cost(
    gr: Grid, traj: StateTrajectory, u: Control, cs: ControlSpec
) -> float:
    """Tracking cost: rectangle rule in time (step-end levels), cell sums in space."""
    nt = traj.nt
    tau = traj.tau
    if u.values.shape != (nt, gr.nx, gr.ny):
        raise ValueError("control shape mismatch")
    if cs.phi_q.shape != (nt, gr.nx, gr.ny):
        raise ValueError("phi_q shape mismatch")
    j = 0.0
    if cs.b1:
        j += 0.5 * cs.b1 * sum(
            tau * g.inner(gr, traj.phi[k + 1] - cs.phi_q[k], traj.phi[k + 1] - cs.phi_q[k])
            for k in range(nt)
        )
    if cs.b2:
        d = traj.phi[nt] - cs.phi_omega
        j += 0.5 * cs.b2 * g.inner(gr, d, d)
    j += 0.5 * cs.b3 * sum(tau * g.inner(gr, u.values[k], u.values[k]) for k in range(nt))
    return float(j)


def project_admissible(values: np.ndarray, u_max: float | np.ndarray) -> np.ndarray:
    """Pointwise clamp of a control-shaped array to the box [0, u_max]."""
    return np.clip(values, 0.0, u_max)


def control_norm(gr: Grid, tau: float, values: np.ndarray) -> float:
    """Discrete L2(Q) norm of a control-shaped array."""
    return float(np.sqrt(tau * gr.cell_area * np.sum(values**2)))


def reduced_gradient(adj: AdjointTrajectory, u: Control, b3: float) -> np.ndarray:
    """Gradient slices p3 + b3*u, with p3 taken at the end level of each interval.

    The duality identity pairs the control slice on [t_k, t_{k+1}) with
    p3 at level k+1; using that level keeps the finite-difference gradient
    check second order in the probe size.
    """
    nt = u.values.shape[0]
    if adj.nt != nt:
        raise ValueError("adjoint and control time grids do not match")
    return adj.p3[1:] + b3 * u.values


def stationarity_residual(
    gr: Grid, tau: float, u: Control, adj: AdjointTrajectory, cs: ControlSpec
) -> float:
    """L2(Q) norm of u - P(-p3/b3); zero iff the discrete optimality condition holds."""
    target = project_admissible(-adj.p3[1:] / cs.b3, cs.u_max)
    return control_norm(gr, tau, u.values - target)


def optimize(
    gr: Grid,
    spec: ModelSpec,
    init: InitialData,
    cs: ControlSpec,
    u0: Control,
    T: float,
    nt: int,
    opts: OptimizeOptions | None = None,
) -> OptimizeResult:
    """Projected gradient descent u <- P(u - s*(p3 + b3*u)) with Armijo backtracking.

    Each iteration runs one forward and one adjoint solve, then a line
    search on J (forward solves only). Stops when the stationarity
    residual drops below tol_stat * (1 + ||u||) or the iteration budget
    runs out. Accepted steps never increase J.
    """
    opts = opts or OptimizeOptions()
    cs.validate()
    u = Control(project_admissible(u0.values.copy(), cs.u_max), cs.u_max)
    tau = T / nt

    result = OptimizeResult(u_star=u)

    def forward(uc: Control) -> StateTrajectory:
        traj, _ = solve_forward(
            gr, spec, init, uc, T, nt, s_stab=opts.s_stab, flux_scheme=opts.flux_scheme
        )
        return traj

    traj = forward(u)
    j_cur = cost(gr, traj, u, cs)
    step_size = 1.0 / cs.b3
    for it in range(opts.max_iters + 1):
        adj = solve_adjoint(traj, cs, spec)
        stat = stationarity_residual(gr, tau, u, adj, cs)
        result.cost_history.append(j_cur)
        result.stationarity_history.append(stat)
        result.iterations = it
        result.u_star = u
        result.trajectory = traj
        result.adjoint = adj
        if stat <= opts.tol_stat * (1.0 + control_norm(gr, tau, u.values)):
            result.converged = True
            result.message = "stationarity tolerance reached"
            return result
        if it == opts.max_iters:
            result.message = "iteration budget exhausted"
            return result

        grad = reduced_gradient(adj, u, cs.b3)
        s = step_size
        accepted = False
        for bt in range(opts.max_backtracks + 1):
            trial_values = project_admissible(u.values - s * grad, cs.u_max)
            trial = Control(trial_values, cs.u_max)
            step_norm_sq = tau * gr.cell_area * float(np.sum((trial_values - u.values) ** 2))
            traj_trial = forward(trial)
            j_trial = cost(gr, traj_trial, trial, cs)
            if j_trial <= j_cur - opts.armijo_c / max(s, 1e-300) * step_norm_sq:
                u, traj, j_cur = trial, traj_trial, j_trial
                result.step_sizes.append(s)
                result.backtrack_counts.append(bt)
                # Gentle step growth after clean accepts keeps progress fast.
                step_size = min(s * 2.0, 1.0 / cs.b3) if bt == 0 else s
                accepted = True
                break
            s *= opts.backtrack
        if not accepted:
            result.message = "line search failed after max backtracks"
            return result
    return result
