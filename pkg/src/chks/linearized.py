"""Directional derivative of the control-to-state map.

Given a stored forward trajectory and a control direction h, this solver
advances the linearized quintuple (psi, eta, alpha, nu, omega) with zero
initial data:

    dt psi - Lap eta = -chi_phi * Lap nu - m*psi + h'(phi*) psi
    eta = -Lap psi + F''(phi*) psi
    dt alpha - Lap alpha = -chi_a div(alpha grad sigma* + a* grad omega)
                           + alpha - 2 a* alpha + h
    dt nu - Lap nu = (chi_phi + c_phi) psi + c_n nu + c_sigma omega
    dt omega - Lap omega = -omega + chi_a alpha - alpha sigma* - a* omega

The discretization is the exact derivative of the forward IMEX map: same
implicit operators, same update ordering (psi -> nu -> omega -> alpha),
with every coefficient frozen from the base trajectory at the level the
forward step used for the corresponding term. That congruence is what
makes the Taylor remainder of the forward map second order in the
direction size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as g
from .grid import Grid, SolverError
from .state import Control, ModelSpec, StateTrajectory


@dataclass
class LinearizedTrajectory:
    grid: Grid
    times: np.ndarray
    psi: np.ndarray  # (Nt+1, nx, ny), linearized phi
    eta: np.ndarray  # linearized mu
    alpha_lin: np.ndarray  # linearized a
    nu: np.ndarray  # linearized n
    omega: np.ndarray  # linearized sigma

    @property
    def nt(self) -> int:
        return len(self.times) - 1

    @property
    def tau(self) -> float:
        return float(self.times[1] - self.times[0])


def solve_linearized(
    base: StateTrajectory,
    spec: ModelSpec,
    h: np.ndarray,
    tau: float | None = None,
) -> LinearizedTrajectory:
    """Solve the linearized system along direction h (shape (Nt, nx, ny))."""
    gr = base.grid
    nt = base.nt
    if h.shape != (nt, gr.nx, gr.ny):
        raise ValueError("direction shape must match the control layout (nt, nx, ny)")
    if tau is None:
        tau = base.tau
    s_stab = base.s_stab
    scheme = base.flux_scheme

    shape = (nt + 1, gr.nx, gr.ny)
    out = LinearizedTrajectory(
        grid=gr,
        times=base.times.copy(),
        psi=np.zeros(shape),
        eta=np.zeros(shape),
        alpha_lin=np.zeros(shape),
        nu=np.zeros(shape),
        omega=np.zeros(shape),
    )
    psi = np.zeros(gr.shape)
    alpha = np.zeros(gr.shape)
    nu = np.zeros(gr.shape)
    omega = np.zeros(gr.shape)

    tau_eff = 1.0 / (1.0 / tau + spec.m)
    for k in range(nt):
        phi_k = base.phi[k]
        a_k = base.a[k]
        sigma_new = base.sigma[k + 1]

        # psi/eta block: derivative of the stabilized phase-field step.
        rhs_psi = (
            psi / tau + spec.prolif.h_prime(phi_k) * psi - spec.chi_phi * g.laplacian(gr, nu)
        )
        rhs_eta = s_stab * psi - spec.pot.f_second(phi_k) * psi
        psi_new, eta_new = g.ch_block_solve(gr, rhs_psi, rhs_eta, tau_eff, s_stab)

        # nu: new psi enters, the rest explicit.
        nu_new = g.helmholtz_solve(
            gr,
            nu / tau + (spec.chi_phi + spec.c_phi) * psi_new + spec.c_n * nu + spec.c_sigma * omega,
            1.0 / tau,
            1.0,
        )

        # omega: same implicit operator as the forward sigma update.
        omega_new = g.helmholtz_solve(
            gr,
            omega / tau + spec.chi_a * alpha - sigma_new * alpha,
            1.0 / tau + 1.0 + a_k,
            1.0,
        )

        # alpha: linearized chemotaxis flux against the base, new omega.
        dflux = g.chemotaxis_flux_linearized(gr, a_k, sigma_new, alpha, omega_new, scheme)
        alpha_new = g.helmholtz_solve(
            gr,
            alpha / tau
            - spec.chi_a * g.divergence(gr, dflux)
            + (1.0 - 2.0 * a_k) * alpha
            + h[k],
            1.0 / tau,
            1.0,
        )

        psi, eta, nu, omega, alpha = psi_new, eta_new, nu_new, omega_new, alpha_new
        if not (
            np.all(np.isfinite(psi))
            and np.all(np.isfinite(alpha))
            and np.all(np.isfinite(omega))
        ):
            raise SolverError(f"non-finite linearized state after step {k}")
        out.psi[k + 1] = psi
        out.eta[k + 1] = eta
        out.alpha_lin[k + 1] = alpha
        out.nu[k + 1] = nu
        out.omega[k + 1] = omega
    return out


def dump_trajectory(lin: LinearizedTrajectory, out_dir) -> None:
    """Write the linearized trajectory with the lin_ snapshot prefix."""
    from .fields_io import write_trajectory

    write_trajectory(
        out_dir,
        lin.grid,
        {
            "psi": lin.psi,
            "eta": lin.eta,
            "alpha": lin.alpha_lin,
            "nu": lin.nu,
            "omega": lin.omega,
        },
        prefix="lin_",
    )


def linearized_norm(lin: LinearizedTrajectory) -> float:
    """Combined norm matching trajectory_distance, for Taylor remainders."""
    gr = lin.grid
    tau = lin.tau
    total = 0.0
    for name in ("psi", "eta", "alpha_lin", "nu", "omega"):
        d = getattr(lin, name)
        sup_l2 = max(g.norm_l2(gr, d[k]) for k in range(d.shape[0]))
        h1_acc = sum(
            tau * (g.norm_l2(gr, d[k]) ** 2 + g.grad_norm_sq(gr, d[k]))
            for k in range(d.shape[0])
        )
        total += sup_l2 + np.sqrt(h1_acc)
    return float(total)


def taylor_remainders(
    gr: Grid,
    spec: ModelSpec,
    base_traj: StateTrajectory,
    init,
    u: Control,
    h: np.ndarray,
    epsilons: list[float],
    T: float,
    nt: int,
) -> list[float]:
    """Remainders ||S(u + eps*h) - S(u) - eps*lin(h)|| for a sweep of eps.

    Perturbed controls must stay admissible; callers pick u interior to the
    box and eps*h small enough.
    """
    from .state import StateTrajectory, solve_forward, trajectory_distance

    lin = solve_linearized(base_traj, spec, h)
    remainders = []
    for eps in epsilons:
        u_eps = Control(u.values + eps * h, u.u_max)
        traj_eps, _ = solve_forward(
            gr, spec, init, u_eps, T, nt,
            s_stab=base_traj.s_stab, flux_scheme=base_traj.flux_scheme,
        )
        predicted = StateTrajectory(
            grid=gr,
            times=base_traj.times.copy(),
            phi=base_traj.phi + eps * lin.psi,
            mu=base_traj.mu + eps * lin.eta,
            a=base_traj.a + eps * lin.alpha_lin,
            n=base_traj.n + eps * lin.nu,
            sigma=base_traj.sigma + eps * lin.omega,
        )
        remainders.append(trajectory_distance(traj_eps, predicted))
    return remainders
