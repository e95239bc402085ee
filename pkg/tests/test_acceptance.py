"""Acceptance gate: one test per criterion, each at its stated tolerance.

Reference desk scale: 16x16 grid, T = 0.5, Nt = 32, regular potential
with c1 = 1, unless a criterion states otherwise. Each test prints one
pass/fail line (visible with pytest -s or in captured output).
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from chks.cli import main
from chks.config import load_config
from chks.control_opt import (
    control_norm,
    optimize,
    reduced_gradient,
    stationarity_residual,
)
from chks.grid import Grid
from chks.potentials import PotentialSpec, ProliferationSpec
from chks.state import Control, InitialData, ModelSpec, solve_forward
from chks.verify import (
    _matrix_case,
    _matrix_specs,
    energy_stability_worst_increase,
    suite_duality,
    suite_gradcheck,
    suite_lipschitz,
    suite_taylor,
)

CONFIG_DIR = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def cfg():
    return load_config(CONFIG_DIR / "verify.cfg")


def report(criterion, passed, detail):
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


def test_criterion_01_gradient_consistency(cfg):
    results = suite_gradcheck(cfg, n_directions=5, eps=1e-4, threshold=1e-3)
    worst = max(r.value for r in results)
    report(
        "criterion 1 (gradient consistency)",
        all(r.passed for r in results) and len(results) >= 5,
        f"max relative error {worst:.3e} <= 1e-3 over {len(results)} directions",
    )


def test_criterion_02_linearization_remainder(cfg):
    results = suite_taylor(cfg, epsilons=(1e-2, 5e-3, 2.5e-3), min_order=1.5)
    worst = min(r.value for r in results)
    report(
        "criterion 2 (linearization remainder)",
        all(r.passed for r in results),
        f"observed Taylor orders >= {worst:.3f} (threshold 1.5)",
    )


def test_criterion_03_adjoint_duality(cfg):
    results = suite_duality(cfg, threshold=1e-3, min_decrease=1.5)
    res32 = next(r for r in results if r.check.startswith("residual"))
    dec = next(r for r in results if r.check == "tau_halving_decrease")
    report(
        "criterion 3 (adjoint duality)",
        res32.passed and dec.passed,
        f"residual {res32.value:.3e} <= 1e-3 at Nt=32, decrease factor "
        f"{dec.value:.2f} >= 1.5 at Nt=64",
    )


def test_criterion_04_projection_characterization():
    cfg_ic = load_config(CONFIG_DIR / "optimize_inverse_crime.cfg")
    gr, T, nt = cfg_ic.grid, cfg_ic.T, cfg_ic.nt
    tau = T / nt
    res = optimize(gr, cfg_ic.model, cfg_ic.init, cfg_ic.control_spec, cfg_ic.u0,
                   T, nt, cfg_ic.opts)
    assert res.converged, "inverse-crime optimize run did not converge"
    stat = stationarity_residual(gr, tau, res.u_star, res.adjoint, cfg_ic.control_spec)
    bound = 1e-6 * (1.0 + control_norm(gr, tau, res.u_star.values))
    proj_ok = stat <= bound

    grad = reduced_gradient(res.adjoint, res.u_star, cfg_ic.control_spec.b3)
    rng = np.random.default_rng(cfg_ic.seed)
    worst_vi = np.inf
    for _ in range(20):
        utest = rng.uniform(0.0, 1.0, res.u_star.values.shape)
        vi = tau * gr.cell_area * float(np.sum(grad * (utest - res.u_star.values)))
        du = control_norm(gr, tau, utest - res.u_star.values)
        worst_vi = min(worst_vi, vi / du)
    vi_ok = worst_vi >= -1e-8
    report(
        "criterion 4 (projection characterization)",
        proj_ok and vi_ok,
        f"||u*-P(-p3/b3)|| = {stat:.3e} <= {bound:.3e}; worst normalized "
        f"variational-inequality value {worst_vi:.3e} >= -1e-8",
    )


def test_criterion_05_trivial_optimum():
    cfg_t = load_config(CONFIG_DIR / "trivial_optimum.cfg")
    gr, T, nt = cfg_t.grid, cfg_t.T, cfg_t.nt
    res = optimize(gr, cfg_t.model, cfg_t.init, cfg_t.control_spec, cfg_t.u0,
                   T, nt, cfg_t.opts)
    u_norm = control_norm(gr, T / nt, res.u_star.values)
    report(
        "criterion 5 (trivial optimum)",
        res.converged
        and res.iterations <= 5
        and res.stationarity_history[-1] <= 1e-8
        and u_norm <= 1e-8,
        f"converged in {res.iterations} iterations, stationarity "
        f"{res.stationarity_history[-1]:.2e} <= 1e-8, ||u*|| = {u_norm:.2e}",
    )


def test_criterion_06_sigma_maximum_principle(cfg):
    lo, hi = 0.0, 1.0
    runs = 0
    for pot_kind, scheme, run_seed in _matrix_specs(cfg, cfg.seed + 10):
        model, init, u = _matrix_case(cfg, pot_kind, run_seed)
        _, rep = solve_forward(cfg.grid, model, init, u, cfg.T, cfg.nt,
                               flux_scheme=scheme)
        lo = min(lo, rep.sigma_min)
        hi = max(hi, rep.sigma_max)
        runs += 1
    report(
        "criterion 6 (sigma maximum principle)",
        lo >= -1e-8 and hi <= 1.0 + 1e-8,
        f"sigma in [{lo:.3e}, {hi:.6f}] over {runs} matrix runs "
        "(both potentials, both flux schemes, 3 seeds)",
    )


def test_criterion_07_mean_value_ode(cfg):
    gr = cfg.grid
    from chks.config import generate_field

    # Stationary closed form: h = m*r0 with the logarithmic potential.
    rng = np.random.default_rng(cfg.seed + 30)
    model_s = ModelSpec(
        m=1.0, chi_phi=0.2, chi_a=0.3, c_phi=0.1, c_n=-1.0, c_sigma=0.1, c_0=0.0,
        pot=PotentialSpec("logarithmic", c2=2.0),
        prolif=ProliferationSpec("constant", h0=0.5),
    )
    phi0 = generate_field(gr, "random_smooth 0.4 0.6 2", rng)
    init_s = InitialData(
        phi0=phi0 - phi0.mean() + 0.5,
        a0=generate_field(gr, "random_smooth 0.3 0.9 2", rng),
        n0=generate_field(gr, "random_smooth -0.1 0.1 2", rng),
        sigma0=generate_field(gr, "random_smooth 0.1 0.9 2", rng),
    )
    u = Control(0.3 * np.ones((cfg.nt, gr.nx, gr.ny)), 1.0)
    _, rep_s = solve_forward(gr, model_s, init_s, u, cfg.T, cfg.nt)

    # Decay closed form: h = 0 with the regular potential.
    model_d = ModelSpec(
        m=1.0, chi_phi=0.2, chi_a=0.3, c_phi=0.1, c_n=-1.0, c_sigma=0.1, c_0=0.0,
        pot=PotentialSpec("regular", c1=1.0), prolif=ProliferationSpec("zero"),
    )
    init_d = InitialData(
        phi0=generate_field(gr, "random_smooth 0.1 0.5 2", rng),
        a0=generate_field(gr, "random_smooth 0.3 0.9 2", rng),
        n0=generate_field(gr, "random_smooth -0.1 0.1 2", rng),
        sigma0=generate_field(gr, "random_smooth 0.1 0.9 2", rng),
    )
    _, rep_d = solve_forward(gr, model_d, init_d, u, cfg.T, cfg.nt)

    # Generic run: residual halves (within 20%) when tau halves.
    model_g, init_g, u_g = _matrix_case(cfg, "regular", cfg.seed + 40)
    _, rep_1 = solve_forward(gr, model_g, init_g, u_g, cfg.T, cfg.nt)
    u_g2 = Control(np.repeat(u_g.values, 2, axis=0), u_g.u_max)
    _, rep_2 = solve_forward(gr, model_g, init_g, u_g2, cfg.T, 2 * cfg.nt)
    ratio = rep_1.mean_ode_residual / rep_2.mean_ode_residual
    report(
        "criterion 7 (mean-value ODE)",
        rep_s.mean_ode_residual <= 1e-12
        and rep_d.mean_ode_residual <= 1e-12
        and 1.6 <= ratio <= 2.4,
        f"stationary residual {rep_s.mean_ode_residual:.2e} <= 1e-12, decay "
        f"residual {rep_d.mean_ode_residual:.2e} <= 1e-12, halving ratio "
        f"{ratio:.3f} in [1.6, 2.4]",
    )


def test_criterion_08_homogeneous_ode_equivalence():
    gr = Grid(16, 16)
    spec = ModelSpec(
        m=1.0, chi_phi=0.2, chi_a=0.3, c_phi=0.1, c_n=-1.0, c_sigma=0.1, c_0=0.0,
        pot=PotentialSpec("regular", c1=1.0), prolif=ProliferationSpec("zero"),
    )
    phi0, a0 = 0.005, 1.0
    sigma0 = (1.0 + spec.chi_a) / 2.0
    n0 = spec.c_sigma * sigma0 / -spec.c_n
    T = 0.5
    nt = 5000  # tau = 1e-4
    init = InitialData(
        phi0=np.full(gr.shape, phi0),
        a0=np.full(gr.shape, a0),
        n0=np.full(gr.shape, n0),
        sigma0=np.full(gr.shape, sigma0),
    )
    u = Control(np.zeros((nt, gr.nx, gr.ny)), 1.0)
    traj, _ = solve_forward(gr, spec, init, u, T, nt)

    def rhs(t, y):
        phi, a, n, sigma = y
        return [
            -spec.m * phi,
            a - a * a,
            (spec.chi_phi + spec.c_phi) * phi + spec.c_n * n + spec.c_sigma * sigma,
            (1.0 - sigma) + a * (spec.chi_a - sigma),
        ]

    ref = solve_ivp(rhs, (0, T), [phi0, a0, n0, sigma0], rtol=1e-12, atol=1e-14)
    got = np.array([traj.phi[-1, 0, 0], traj.a[-1, 0, 0],
                    traj.n[-1, 0, 0], traj.sigma[-1, 0, 0]])
    sup_err = float(np.abs(got - ref.y[:, -1]).max())
    report(
        "criterion 8 (homogeneous ODE equivalence)",
        sup_err <= 1e-6,
        f"sup error {sup_err:.3e} <= 1e-6 at T with tau = 1e-4",
    )


def test_criterion_09_decoupled_energy_stability(cfg):
    worst = max(
        energy_stability_worst_increase(cfg.grid, cfg.T, cfg.nt, seed)
        for seed in (cfg.seed + 50, cfg.seed + 51, cfg.seed + 52)
    )
    report(
        "criterion 9 (decoupled phase-field energy stability)",
        worst <= 1e-11,
        f"max one-step energy increase {worst:.2e} <= 1e-11 over 3 seeds "
        "at the default stabilization",
    )


def test_criterion_10_empirical_continuous_dependence(cfg):
    results = suite_lipschitz(cfg, n_pairs=10, max_factor=3.0)
    by_name = {r.check: r for r in results}
    factor = by_name["grid_refinement_factor"]
    finite = all(np.isfinite(r.value) for r in results)
    report(
        "criterion 10 (empirical continuous dependence)",
        finite and factor.passed,
        f"max Lipschitz ratios {by_name['max_ratio_16'].value:.3f} (16^2) vs "
        f"{by_name['max_ratio_32'].value:.3f} (32^2), grid factor "
        f"{factor.value:.3f} <= 3",
    )


def test_criterion_11_positivity_of_a(cfg):
    worst = np.inf
    runs = 0
    for pot_kind, scheme, run_seed in _matrix_specs(cfg, cfg.seed + 10):
        if scheme != "upwind":
            continue
        model, init, u = _matrix_case(cfg, pot_kind, run_seed)
        _, rep = solve_forward(cfg.grid, model, init, u, cfg.T, cfg.nt,
                               flux_scheme="upwind")
        worst = min(worst, rep.a_min)
        runs += 1

    model, init, _ = _matrix_case(cfg, "regular", cfg.seed + 20)
    init.a0 = np.zeros(cfg.grid.shape)
    u0 = Control(np.zeros((cfg.nt, cfg.grid.nx, cfg.grid.ny)), 1.0)
    traj, _ = solve_forward(cfg.grid, model, init, u0, cfg.T, cfg.nt,
                            flux_scheme="upwind", check_admissibility=False)
    a_abs = float(np.abs(traj.a).max())
    report(
        "criterion 11 (positivity of a)",
        worst >= -1e-10 and a_abs == 0.0,
        f"min a = {worst:.3e} >= -1e-10 over {runs} upwind runs; "
        f"a stays exactly zero from zero data (max |a| = {a_abs})",
    )


def test_criterion_12_determinism(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    cfg_path = str(CONFIG_DIR / "simulate.cfg")
    assert main(["simulate", cfg_path, "--out", str(out1)]) == 0
    assert main(["simulate", cfg_path, "--out", str(out2)]) == 0
    same_series = (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()
    snaps = sorted(out1.glob("*.fld"))
    same_snaps = all(
        s.read_bytes() == (out2 / s.name).read_bytes() for s in snaps
    )
    report(
        "criterion 12 (determinism)",
        same_series and same_snaps and len(snaps) == 5 * 33,
        f"series.csv and {len(snaps)} snapshots bit-identical across reruns",
    )
