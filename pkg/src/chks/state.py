"""Forward-in-time integration of the coupled phase-field / chemotaxis system.

Unknowns at cell centers: phi (tumor phase), mu (chemical potential),
a (vasculature fraction), n (nutrient), sigma (signal concentration).
The continuous system, with homogeneous Neumann conditions throughout:

    dt phi - Lap mu = -chi_phi * Lap n - m*phi + h(phi)
    mu = -Lap phi + F'(phi)
    dt a - Lap a = -chi_a * div(a grad sigma) + a - a^2 + u
    dt n - Lap n = (chi_phi + c_phi)*phi + c_n*n + c_sigma*sigma + c_0
    dt sigma - Lap sigma = (1 - sigma) + a*(chi_a - sigma)

One time step is a first-order IMEX sweep in the fixed order
phi -> n -> sigma -> a:

1. phi/mu block, stabilized semi-implicit: the Laplacians and the m*phi
   relaxation are implicit, F' and h explicit, plus s_stab*(phi+ - phi)
   added to mu. The m-term is absorbed by calling the block solve with
   the effective step 1/(1/tau + m); this makes the discrete mean of phi
   obey the implicit-Euler mean ODE exactly (up to the explicit h lag).
2. n: implicit diffusion, reactions explicit, phi taken at the new level.
3. sigma: diffusion and the full reaction (1 + a)*sigma implicit with a
   frozen at max(a, 0), source 1 + chi_a*a explicit. The system matrix is
   an M-matrix and the right side is nonnegative for admissible states,
   which keeps sigma in [0, 1] up to solver tolerance.
4. a: implicit diffusion, explicit chemotaxis flux against the *new*
   sigma, explicit logistic term and control source.

The full trajectory is stored (needed for linearized/adjoint replay).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as g
from .grid import Grid, SolverError
from .potentials import (
    AdmissibilityError,
    PotentialSpec,
    ProliferationSpec,
    default_s_stab,
    derive_constants,
)


@dataclass
class ModelSpec:
    """Structural parameters of the system."""

    m: float = 1.0
    chi_phi: float = 0.2
    chi_a: float = 0.3
    c_phi: float = 0.1
    c_n: float = -1.0
    c_sigma: float = 0.1
    c_0: float = 0.0
    pot: PotentialSpec = field(default_factory=PotentialSpec)
    prolif: ProliferationSpec = field(default_factory=ProliferationSpec)

    def validate(self) -> None:
        """Check the structural admissibility conditions (see README table)."""
        if not self.m > 0:
            raise AdmissibilityError("(2.3): m must be positive")
        if not (0.0 < self.chi_phi < 1.0):
            raise AdmissibilityError("(2.3): chi_phi must lie in (0, 1)")
        if not (0.0 < self.chi_a < 1.0):
            raise AdmissibilityError("(2.3): chi_a must lie in (0, 1)")
        for name in ("c_phi", "c_n", "c_sigma", "c_0"):
            if not np.isfinite(getattr(self, name)):
                raise AdmissibilityError(f"(2.3): {name} must be a finite real")


@dataclass
class InitialData:
    phi0: np.ndarray
    a0: np.ndarray
    n0: np.ndarray
    sigma0: np.ndarray

    def validate(self, spec: ModelSpec) -> None:
        """Check the data admissibility conditions against the model spec."""
        for name in ("phi0", "a0", "n0", "sigma0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise AdmissibilityError(f"initial field {name} contains non-finite values")
        if not spec.pot.contains(float(self.phi0.min()), float(self.phi0.max())):
            raise AdmissibilityError(
                "(2.10): range of phi0 must lie inside the potential domain"
            )
        if not float(self.a0.min()) > 0.0:
            raise AdmissibilityError("(2.12): a0 must be positive everywhere")
        if float(self.sigma0.min()) < 0.0 or float(self.sigma0.max()) > 1.0:
            raise AdmissibilityError("(2.13): sigma0 must take values in [0, 1]")
        derive_constants(spec.m, spec.pot, spec.prolif, float(self.phi0.mean()))


@dataclass
class Control:
    """Piecewise-constant-in-time distributed source: values[k] acts on step k."""

    values: np.ndarray  # (Nt, nx, ny)
    u_max: float | np.ndarray = 1.0

    def validate(self) -> None:
        if np.ndim(self.u_max) > 0 and np.asarray(self.u_max).min() < 0:
            raise AdmissibilityError("(2.15): u_max must be nonnegative")
        if np.isscalar(self.u_max) and self.u_max < 0:
            raise AdmissibilityError("(2.15): u_max must be nonnegative")
        if float(self.values.min()) < 0.0 or np.any(self.values > self.u_max):
            raise AdmissibilityError("(2.14): control must satisfy 0 <= u <= u_max")


@dataclass
class State:
    """One time level of the solution quintuple."""

    phi: np.ndarray
    mu: np.ndarray
    a: np.ndarray
    n: np.ndarray
    sigma: np.ndarray


@dataclass
class StateTrajectory:
    """Full stored trajectory on the uniform step grid t_k = k * tau."""

    grid: Grid
    times: np.ndarray  # (Nt+1,)
    phi: np.ndarray  # (Nt+1, nx, ny)
    mu: np.ndarray
    a: np.ndarray
    n: np.ndarray
    sigma: np.ndarray
    control: Control | None = None
    s_stab: float = 0.0
    flux_scheme: str = "centered"

    @property
    def nt(self) -> int:
        return len(self.times) - 1

    @property
    def tau(self) -> float:
        return float(self.times[1] - self.times[0])

    def state(self, k: int) -> State:
        return State(self.phi[k], self.mu[k], self.a[k], self.n[k], self.sigma[k])


@dataclass
class InvariantReport:
    sigma_min: float
    sigma_max: float
    a_min: float
    phi_min: float
    phi_max: float
    mean_ode_residual: float
    energy_series: np.ndarray
    clamp_events: int


def step(
    gr: Grid,
    state: State,
    u_k: np.ndarray,
    spec: ModelSpec,
    tau: float,
    s_stab: float,
    flux_scheme: str = "centered",
) -> State:
    """Advance one IMEX step; see the module docstring for the scheme."""
    if tau <= 0:
        raise SolverError("step requires tau > 0")
    phi, a, n, sigma = state.phi, state.a, state.n, state.sigma

    # 1. phi/mu block. m is implicit via the effective step.
    tau_eff = 1.0 / (1.0 / tau + spec.m)
    rhs_phi = phi / tau + spec.prolif.h_value(phi) - spec.chi_phi * g.laplacian(gr, n)
    rhs_mu = s_stab * phi - spec.pot.f_prime(phi)
    phi_new, mu_new = g.ch_block_solve(gr, rhs_phi, rhs_mu, tau_eff, s_stab)

    # 2. n: implicit diffusion, explicit reactions, new phi.
    rhs_n = (
        n / tau
        + (spec.chi_phi + spec.c_phi) * phi_new
        + spec.c_n * n
        + spec.c_sigma * sigma
        + spec.c_0
    )
    n_new = g.helmholtz_solve(gr, rhs_n, 1.0 / tau, 1.0)

    # 3. sigma: monotone implicit reaction with frozen a >= 0.
    a_frozen = np.maximum(a, 0.0)
    sigma_new = g.helmholtz_solve(
        gr,
        sigma / tau + 1.0 + spec.chi_a * a_frozen,
        1.0 / tau + 1.0 + a_frozen,
        1.0,
    )

    # 4. a: implicit diffusion, explicit chemotaxis against new sigma.
    flux = g.chemotaxis_flux(gr, a, sigma_new, flux_scheme)
    rhs_a = a / tau - spec.chi_a * g.divergence(gr, flux) + a - a * a + u_k
    a_new = g.helmholtz_solve(gr, rhs_a, 1.0 / tau, 1.0)

    for name, f in (("phi", phi_new), ("mu", mu_new), ("n", n_new), ("sigma", sigma_new), ("a", a_new)):
        if not np.all(np.isfinite(f)):
            raise SolverError(f"non-finite {name} after step")
    return State(phi_new, mu_new, a_new, n_new, sigma_new)


def solve_forward(
    gr: Grid,
    spec: ModelSpec,
    init: InitialData,
    u: Control,
    T: float,
    nt: int,
    s_stab: float | None = None,
    flux_scheme: str = "centered",
    check_admissibility: bool = True,
) -> tuple[StateTrajectory, InvariantReport]:
    """Integrate the system on [0, T] with nt uniform steps.

    mu at step 0 is the diagnostic value -Lap(phi0) + F'(phi0); afterwards
    it is a solved unknown. Set check_admissibility=False to run
    deliberately degenerate data (used by the verification suites).
    """
    if nt < 1:
        raise ValueError("nt must be at least 1")
    if u.values.shape != (nt, gr.nx, gr.ny):
        raise ValueError("control shape must be (nt, nx, ny)")
    if check_admissibility:
        spec.validate()
        init.validate(spec)
        u.validate()
    if s_stab is None:
        s_stab = default_s_stab(spec.pot)

    tau = T / nt
    shape = (nt + 1, gr.nx, gr.ny)
    traj = StateTrajectory(
        grid=gr,
        times=np.linspace(0.0, T, nt + 1),
        phi=np.empty(shape),
        mu=np.empty(shape),
        a=np.empty(shape),
        n=np.empty(shape),
        sigma=np.empty(shape),
        control=u,
        s_stab=s_stab,
        flux_scheme=flux_scheme,
    )
    spec.pot.clamp_counter.reset()
    cur = State(
        init.phi0.copy(),
        -g.laplacian(gr, init.phi0) + spec.pot.f_prime(init.phi0),
        init.a0.copy(),
        init.n0.copy(),
        init.sigma0.copy(),
    )
    energies = np.empty(nt + 1)
    for k in range(nt + 1):
        traj.phi[k], traj.mu[k] = cur.phi, cur.mu
        traj.a[k], traj.n[k], traj.sigma[k] = cur.a, cur.n, cur.sigma
        energies[k] = energy(gr, cur, spec)
        if k == nt:
            break
        try:
            cur = step(gr, cur, u.values[k], spec, tau, s_stab, flux_scheme)
        except SolverError as exc:
            raise SolverError(f"forward step {k} failed: {exc}") from exc

    report = InvariantReport(
        sigma_min=float(traj.sigma.min()),
        sigma_max=float(traj.sigma.max()),
        a_min=float(traj.a.min()),
        phi_min=float(traj.phi.min()),
        phi_max=float(traj.phi.max()),
        mean_ode_residual=check_mean_ode(traj, spec),
        energy_series=energies,
        clamp_events=spec.pot.clamp_counter.count,
    )
    return traj, report


def energy(gr: Grid, state: State, spec: ModelSpec) -> float:
    """Free energy: entropy of a, chemotaxis couplings, gradient terms, and F(phi).

    E = int a*(ln a - 1) - chi_phi int n*phi - chi_a int a*sigma
        + (1/2) int (|grad phi|^2 + |grad n|^2 + |grad sigma|^2) + int F(phi)

    The entropy term clamps a at 1e-14 from below.
    """
    a_safe = np.maximum(state.a, 1e-14)
    area = gr.cell_area
    ent = area * float(np.sum(a_safe * (np.log(a_safe) - 1.0)))
    coup = -spec.chi_phi * g.inner(gr, state.n, state.phi) - spec.chi_a * g.inner(
        gr, state.a, state.sigma
    )
    grads = 0.5 * (
        g.grad_norm_sq(gr, state.phi)
        + g.grad_norm_sq(gr, state.n)
        + g.grad_norm_sq(gr, state.sigma)
    )
    pot = area * float(np.sum(spec.pot.f_value(state.phi)))
    return ent + coup + grads + pot


def energy_phi_part(gr: Grid, phi: np.ndarray, spec: ModelSpec) -> float:
    """Phase-field part of the energy: (1/2) int |grad phi|^2 + int F(phi)."""
    return 0.5 * g.grad_norm_sq(gr, phi) + gr.cell_area * float(
        np.sum(spec.pot.f_value(phi))
    )


def check_mean_ode(traj: StateTrajectory, spec: ModelSpec) -> float:
    """Max residual of the mean-value ODE  d/dt mean(phi) + m*mean(phi) = mean(h(phi)).

    Measured in backward-Euler form at the new level:

        |(mean_{k+1} - mean_k)/tau + m*mean_{k+1} - mean(h(phi_{k+1}))|

    The scheme satisfies this identity with h lagged at level k, so the
    residual equals the one-step lag of mean(h(phi)) and is O(tau); it
    vanishes to round-off when h is constant (in particular h = 0 and
    h = m*r0).
    """
    tau = traj.tau
    means = traj.phi.mean(axis=(1, 2))
    hbar = np.array([float(spec.prolif.h_value(traj.phi[k]).mean()) for k in range(traj.nt + 1)])
    res = 0.0
    for k in range(traj.nt):
        r = abs((means[k + 1] - means[k]) / tau + spec.m * means[k + 1] - hbar[k + 1])
        res = max(res, r)
    return res


def trajectory_distance(t1: StateTrajectory, t2: StateTrajectory) -> float:
    """Combined state norm of the difference of two trajectories.

    Sum over the five components of sup-in-time L2 norms plus
    L2-in-time H1-seminorm contributions; mesh-independent quadratures so
    values are comparable across grids.
    """
    gr = t1.grid
    tau = t1.tau
    total = 0.0
    for name in ("phi", "mu", "a", "n", "sigma"):
        d = getattr(t1, name) - getattr(t2, name)
        sup_l2 = max(g.norm_l2(gr, d[k]) for k in range(d.shape[0]))
        h1_acc = sum(
            tau * (g.norm_l2(gr, d[k]) ** 2 + g.grad_norm_sq(gr, d[k]))
            for k in range(d.shape[0])
        )
        total += sup_l2 + np.sqrt(h1_acc)
    return float(total)
