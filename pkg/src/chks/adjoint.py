"""Backward-in-time adjoint system for the tracking cost.

The adjoint quintuple (p1, ..., p5) pairs with (phi, mu, a, n, sigma) and
solves, backward from T with final data p1(T) = b2*(phi*(T) - phi_Omega)
and (p3, p4, p5)(T) = 0:

    -dt p1 - Lap p2 + (m - h'(phi*)) p1 + F''(phi*) p2 - (chi_phi + c_phi) p4
        = b1 (phi* - phi_Q)
    p2 = -Lap p1
    -dt p3 - Lap p3 - chi_a grad(sigma*).grad(p3) + (2 a* - 1) p3
        + (sigma* - chi_a) p5 = 0
    -dt p4 - Lap p4 - c_n p4 + chi_phi Lap p1 = 0
    -dt p5 - Lap p5 + chi_a div(a* grad p3) + (1 + a*) p5 - c_sigma p4 = 0

This is the continuous adjoint system discretized to transpose the
forward IMEX sweep as closely as possible (update order a -> sigma -> n
-> phi/mu, the reverse of the forward order; coefficient freezing levels
chosen adjoint-consistent with the forward freezing). It is deliberately
not the exact transpose of the discrete forward map: the final condition
is imposed in its clean continuous form, and the stabilization terms of
the phase-field block are dropped from the (p1, p2) pair, so the duality
identity

    int_Q h p3 = b1 int_Q (phi* - phi_Q) psi + b2 int_Om (phi*(T) - phi_Om) psi(T)

holds with an O(tau) residual, which duality_residual quantifies.

The advective term grad(sigma*).grad(p3) is evaluated with centered face
gradients and averaged back to cell centers; no upwinding in the adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as g
from .grid import Grid, SolverError
from .state import ModelSpec, StateTrajectory


@dataclass
class ControlSpec:
    """Cost weights, tracking targets and the control box bound.

    phi_q has shape (Nt, nx, ny); slice k is the running target on the
    step interval ending at t_{k+1}. phi_omega is the final-time target.
    """

    b1: float
    b2: float
    b3: float
    phi_q: np.ndarray
    phi_omega: np.ndarray
    u_max: float | np.ndarray = 1.0

    def validate(self) -> None:
        from .potentials import AdmissibilityError

        if self.b1 < 0 or self.b2 < 0:
            raise AdmissibilityError("(6.3): b1 and b2 must be nonnegative")
        if not self.b3 > 0:
            raise AdmissibilityError("(6.3): b3 must be positive")
        if np.ndim(self.u_max) > 0:
            if np.asarray(self.u_max).min() < 0:
                raise AdmissibilityError("(6.4): u_max must be nonnegative")
        elif self.u_max < 0:
            raise AdmissibilityError("(6.4): u_max must be nonnegative")


@dataclass
class AdjointTrajectory:
    grid: Grid
    times: np.ndarray
    p1: np.ndarray  # (Nt+1, nx, ny)
    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray
    p5: np.ndarray

    @property
    def nt(self) -> int:
        return len(self.times) - 1

    @property
    def tau(self) -> float:
        return float(self.times[1] - self.times[0])


def adjoint_coefficients(base: StateTrajectory, spec: ModelSpec, k: int) -> dict:
    """Frozen coefficient fields of the adjoint system at backward step k.

    f11 = m - h'(phi*), f12 = F''(phi*), f14 = -chi_phi - c_phi, f33 = -1,
    f35 = sigma* - chi_a, f54 = -c_sigma, f55 = 1; all other couplings zero.
    phi* is frozen at level k (the level the forward step k -> k+1 used),
    sigma* at level k+1 (the forward implicit level).
    """
    phi_k = base.phi[k]
    return {
        "f11": spec.m - spec.prolif.h_prime(phi_k),
        "f12": spec.pot.f_second(phi_k),
        "f14": -spec.chi_phi - spec.c_phi,
        "f33": -1.0,
        "f35": base.sigma[k + 1] - spec.chi_a,
        "f54": -spec.c_sigma,
        "f55": 1.0,
    }


def solve_adjoint(
    base: StateTrajectory,
    cost: ControlSpec,
    spec: ModelSpec,
    tau: float | None = None,
) -> AdjointTrajectory:
    """Backward sweep from step Nt to 0; see the module docstring."""
    gr = base.grid
    nt = base.nt
    if tau is None:
        tau = base.tau
    cost.validate()
    if cost.phi_q.shape != (nt, gr.nx, gr.ny):
        raise ValueError("phi_q must have shape (nt, nx, ny)")
    if cost.phi_omega.shape != gr.shape:
        raise ValueError("phi_omega must match the grid shape")

    shape = (nt + 1, gr.nx, gr.ny)
    adj = AdjointTrajectory(
        grid=gr,
        times=base.times.copy(),
        p1=np.zeros(shape),
        p2=np.zeros(shape),
        p3=np.zeros(shape),
        p4=np.zeros(shape),
        p5=np.zeros(shape),
    )
    p1_final = cost.b2 * (base.phi[nt] - cost.phi_omega)
    p3 = np.zeros(gr.shape)
    p4 = np.zeros(gr.shape)
    p5 = np.zeros(gr.shape)
    adj.p1[nt], adj.p2[nt] = p1_final, -g.laplacian(gr, p1_final)

    tau_eff = 1.0 / (1.0 / tau + spec.m)
    s_stab = base.s_stab
    # Weak imposition of the final condition: the final data (and the
    # running misfit sampled on the last interval) enters the sweep
    # through one application of the implicit block, the same way the
    # transpose of the forward map pairs the terminal cost with the last
    # step. Imposing it strongly instead would leave the high modes of
    # the final misfit undamped (an O(tau*lambda^2) error).
    rhs_final = p1_final / tau
    if cost.b1:
        rhs_final = rhs_final + cost.b1 * (base.phi[nt] - cost.phi_q[nt - 1])
    p1, p2 = g.ch_block_solve(
        gr, rhs_final, np.zeros(gr.shape), tau_eff, s_stab, transpose=True
    )
    for k in range(nt - 1, -1, -1):
        a_k = base.a[k]
        sigma_new = base.sigma[k + 1]
        co = adjoint_coefficients(base, spec, k)

        # p3: transport source from centered face gradients, reaction explicit.
        grad_sigma = g.gradient_faces(gr, sigma_new)
        grad_p3 = g.gradient_faces(gr, p3)
        advect = g.face_product_to_cells(gr, grad_sigma, grad_p3)
        rhs_p3 = (
            p3 / tau
            + (1.0 - 2.0 * a_k) * p3
            + spec.chi_a * advect
            - co["f35"] * p5
        )
        p3_new = g.helmholtz_solve(gr, rhs_p3, 1.0 / tau, 1.0)

        # p5: same implicit operator family as the forward sigma update.
        # a* is frozen at level k here; the forward step that produced the
        # level-k sigma froze level k-1, so this choice staggers the
        # coefficient by one step and is the O(tau) gap the duality
        # residual measures.
        aface = g.face_average(gr, a_k)
        gp3 = g.gradient_faces(gr, p3_new)
        div_term = g.divergence(
            gr, g.FaceFlux(aface.fx * gp3.fx, aface.fy * gp3.fy)
        )
        rhs_p5 = p5 / tau - co["f54"] * p4 - spec.chi_a * div_term
        p5_new = g.helmholtz_solve(gr, rhs_p5, 1.0 / tau + 1.0 + a_k, 1.0)

        # p4: nutrient adjoint with the phase coupling explicit.
        rhs_p4 = (1.0 / tau + spec.c_n) * p4 - spec.chi_phi * g.laplacian(gr, p1)
        p4_new = g.helmholtz_solve(gr, rhs_p4, 1.0 / tau, 1.0)

        # (p1, p2) block, transposed so that p2 = -Lap p1 holds exactly
        # and the stabilization terms mirror the forward s_stab*(phi+ - phi).
        # The running-cost samples pair with levels 1..Nt (right-endpoint
        # rule); the formal level 0 carries none.
        f10 = cost.b1 * (base.phi[k] - cost.phi_q[k - 1]) if (cost.b1 and k >= 1) else 0.0
        rhs_p1 = (
            p1 / tau
            + spec.prolif.h_prime(base.phi[k]) * p1
            + (s_stab - co["f12"]) * p2
            - co["f14"] * p4_new
            + f10
        )
        p1_new, p2_new = g.ch_block_solve(
            gr, rhs_p1, np.zeros(gr.shape), tau_eff, s_stab, transpose=True
        )

        p1, p2, p3, p4, p5 = p1_new, p2_new, p3_new, p4_new, p5_new
        if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p3)) and np.all(np.isfinite(p5))):
            raise SolverError(f"non-finite adjoint state at backward step {k}")
        adj.p1[k], adj.p2[k], adj.p3[k], adj.p4[k], adj.p5[k] = p1, p2, p3, p4, p5
    return adj


def dump_trajectory(adj: AdjointTrajectory, out_dir) -> None:
    """Write the adjoint trajectory with the adj_ snapshot prefix."""
    from .fields_io import write_trajectory

    write_trajectory(
        out_dir,
        adj.grid,
        {f"p{i}": getattr(adj, f"p{i}") for i in range(1, 6)},
        prefix="adj_",
    )


def duality_residual(
    base: StateTrajectory,
    adj: AdjointTrajectory,
    h: np.ndarray,
    lin,
    cost: ControlSpec,
) -> float:
    """Relative gap of the adjoint/linearized duality identity.

    LHS = int_Q h p3, RHS = b1 int_Q (phi* - phi_Q) psi
                          + b2 int_Om (phi*(T) - phi_Om) psi(T),
    rectangle rule in time with p3 and psi paired at the step end levels.
    Returns |LHS - RHS| / (|LHS| + |RHS| + 1e-30).
    """
    gr = base.grid
    nt = base.nt
    tau = base.tau
    if lin.nt != nt or adj.nt != nt:
        raise ValueError("trajectories must share the time grid")
    lhs = sum(tau * g.inner(gr, h[k], adj.p3[k + 1]) for k in range(nt))
    rhs = cost.b2 * g.inner(gr, base.phi[nt] - cost.phi_omega, lin.psi[nt])
    if cost.b1:
        rhs += cost.b1 * sum(
            tau * g.inner(gr, base.phi[k + 1] - cost.phi_q[k], lin.psi[k + 1])
            for k in range(nt)
        )
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)
