"""Run configuration: a flat, sectioned key-value text format.

Grammar (one statement per line):

    # comment                 blank lines and '#'-to-end-of-line comments
    seed = <int>              top-level, before any section
    [section]                 section header
    key = value               value is one token or a generator phrase

Sections and keys:

    [grid]     nx, ny, lx, ly
    [model]    m, chi_phi, chi_a, c_phi, c_n, c_sigma, c_0,
               potential (regular|logarithmic), c1, c2, eps_clamp,
               prolif (zero|constant|logistic), h0, k
    [initial]  phi0, a0, n0, sigma0   (field generators, see below)
    [control]  b1, b2, b3, u_max (number or 'file <path>'),
               u0 (field generator, replicated over steps),
               targets (simulation|fields),
               u_true (generator; targets=simulation),
               phi_q, phi_omega (generators; targets=fields)
    [time]     T, Nt, s_stab (number or 'default'), flux_scheme
    [optimize] tol_stat, max_iters, armijo_c, backtrack

Field generators:

    constant <v>
    cosine <offset> <amplitude> <kx> <ky>      offset + amp*cos(kx pi x/lx)*cos(ky pi y/ly)
    random_smooth <lo> <hi> <modes>            seeded low-order cosine series,
                                               affinely mapped into [lo, hi]
    file <path>                                field snapshot file

Every admissibility condition of the model is checked at load time; a
violation raises ConfigError whose message cites the condition identifier
(see the README table) and the config line that set the offending value.
All randomness derives from the single seed, so identical configs produce
bit-identical runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adjoint import ControlSpec
from .fields_io import read_field
from .grid import Grid
from .potentials import AdmissibilityError, PotentialSpec, ProliferationSpec
from .state import Control, InitialData, ModelSpec
from .control_opt import OptimizeOptions


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    grid: Grid
    model: ModelSpec
    init: InitialData
    control_spec: ControlSpec
    u0: Control
    T: float
    nt: int
    s_stab: float | None
    flux_scheme: str
    opts: OptimizeOptions
    seed: int
    u_true: np.ndarray | None = None
    raw: dict = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return self.T / self.nt


def _parse_lines(text: str) -> tuple[dict[str, dict[str, tuple[str, int]]], dict[str, tuple[str, int]]]:
    """Parse into {section: {key: (value, line_no)}} plus top-level keys."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    top: dict[str, tuple[str, int]] = {}
    current: dict[str, tuple[str, int]] | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if not name:
                raise ConfigError(f"line {line_no}: empty section name")
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw.strip()!r}")
        target = top if current is None else current
        target[key.lower()] = (value, line_no)
    return sections, top


class _Section:
    def __init__(self, name: str, data: dict[str, tuple[str, int]]):
        self.name = name
        self.data = data

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default=None):
        if key in self.data:
            return self.data[key]
        if default is None:
            raise ConfigError(f"section [{self.name}] is missing required key '{key}'")
        return (default, 0)

    def number(self, key: str, default: str | None = None) -> float:
        value, line_no = self.raw(key, default)
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"line {line_no}: [{self.name}] {key} must be a number, got {value!r}")

    def integer(self, key: str, default: str | None = None) -> int:
        value, line_no = self.raw(key, default)
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"line {line_no}: [{self.name}] {key} must be an integer, got {value!r}")

    def word(self, key: str, default: str | None = None) -> str:
        value, _ = self.raw(key, default)
        return value.strip().lower()


def generate_field(
    gr: Grid, phrase: str, rng: np.random.Generator, base_dir: Path | None = None
) -> np.ndarray:
    """Realize a field generator phrase on the grid."""
    tokens = phrase.split()
    kind = tokens[0].lower()
    x, y = gr.cell_centers()
    if kind == "constant":
        return np.full(gr.shape, float(tokens[1]))
    if kind == "cosine":
        off, amp, kx, ky = (float(t) for t in tokens[1:5])
        return off + amp * np.cos(kx * np.pi * x / gr.lx) * np.cos(ky * np.pi * y / gr.ly)
    if kind == "random_smooth":
        lo, hi = float(tokens[1]), float(tokens[2])
        modes = int(tokens[3])
        f = np.zeros(gr.shape)
        for kx in range(modes + 1):
            for ky in range(modes + 1):
                c = rng.normal()
                f += c * np.cos(kx * np.pi * x / gr.lx) * np.cos(ky * np.pi * y / gr.ly)
        fmin, fmax = float(f.min()), float(f.max())
        if fmax - fmin < 1e-30:
            return np.full(gr.shape, 0.5 * (lo + hi))
        return lo + (hi - lo) * (f - fmin) / (fmax - fmin)
    if kind == "file":
        path = Path(tokens[1])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        fgrid, data = read_field(path)
        if fgrid.shape != gr.shape:
            raise ConfigError(
                f"field file {path} has shape {fgrid.shape}, expected {gr.shape}"
            )
        return data
    raise ConfigError(f"unknown field generator {kind!r}")


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    """Parse and fully validate a run configuration file."""
    path = Path(path)
    sections, top = _parse_lines(path.read_text())
    base_dir = path.parent

    seed = seed_override
    if seed is None:
        seed = int(top.get("seed", ("1", 0))[0])
    rng = np.random.default_rng(seed)

    sg = _Section("grid", sections.get("grid", {}))
    gr = Grid(
        nx=sg.integer("nx", "16"),
        ny=sg.integer("ny", "16"),
        lx=sg.number("lx", "1.0"),
        ly=sg.number("ly", "1.0"),
    )
    if gr.nx < 2 or gr.ny < 2:
        raise ConfigError("[grid]: nx and ny must be at least 2 for a PDE run")

    sm = _Section("model", sections.get("model", {}))
    pot_kind = sm.word("potential", "regular")
    try:
        pot = PotentialSpec(
            kind=pot_kind,
            c1=sm.number("c1", "1.0"),
            c2=sm.number("c2", "2.0"),
            eps_clamp=sm.number("eps_clamp", "1e-8"),
        )
        prolif = ProliferationSpec(
            kind=sm.word("prolif", "zero"),
            h0=sm.number("h0", "0.0"),
            k=sm.number("k", "1.0"),
        )
        model = ModelSpec(
            m=sm.number("m", "1.0"),
            chi_phi=sm.number("chi_phi", "0.2"),
            chi_a=sm.number("chi_a", "0.3"),
            c_phi=sm.number("c_phi", "0.1"),
            c_n=sm.number("c_n", "-1.0"),
            c_sigma=sm.number("c_sigma", "0.1"),
            c_0=sm.number("c_0", "0.0"),
            pot=pot,
            prolif=prolif,
        )
        model.validate()
    except AdmissibilityError as exc:
        raise ConfigError(f"[model]: {exc}") from exc

    st = _Section("time", sections.get("time", {}))
    T = st.number("t", "0.5")
    nt = st.integer("nt", "32")
    if T <= 0 or nt < 1:
        raise ConfigError("[time]: T must be positive and Nt at least 1")
    s_raw = st.word("s_stab", "default")
    s_stab = None if s_raw == "default" else float(s_raw)
    flux_scheme = st.word("flux_scheme", "centered")
    if flux_scheme not in ("centered", "upwind"):
        raise ConfigError("[time]: flux_scheme must be 'centered' or 'upwind'")

    si = _Section("initial", sections.get("initial", {}))
    init = InitialData(
        phi0=generate_field(gr, si.raw("phi0", "constant 0.5")[0], rng, base_dir),
        a0=generate_field(gr, si.raw("a0", "constant 1.0")[0], rng, base_dir),
        n0=generate_field(gr, si.raw("n0", "constant 0.0")[0], rng, base_dir),
        sigma0=generate_field(gr, si.raw("sigma0", "constant 0.5")[0], rng, base_dir),
    )
    try:
        init.validate(model)
    except AdmissibilityError as exc:
        raise ConfigError(f"[initial]: {exc}") from exc

    sc = _Section("control", sections.get("control", {}))
    umax_raw, _ = sc.raw("u_max", "1.0")
    if umax_raw.split()[0].lower() == "file":
        u_max: float | np.ndarray = generate_field(gr, umax_raw, rng, base_dir)
    else:
        u_max = float(umax_raw)
    b1 = sc.number("b1", "0.0")
    b2 = sc.number("b2", "0.0")
    b3 = sc.number("b3", "1.0")

    u0_slice = generate_field(gr, sc.raw("u0", "constant 0.0")[0], rng, base_dir)
    u0 = Control(np.repeat(u0_slice[None, :, :], nt, axis=0), u_max)

    u_true = None
    targets = sc.word("targets", "fields")
    if targets == "simulation":
        u_true_slice = generate_field(gr, sc.raw("u_true", "constant 0.0")[0], rng, base_dir)
        u_true = np.repeat(np.clip(u_true_slice, 0.0, u_max)[None, :, :], nt, axis=0)
        from .state import solve_forward

        traj_true, _ = solve_forward(
            gr, model, init, Control(u_true, u_max), T, nt,
            s_stab=s_stab, flux_scheme=flux_scheme,
        )
        phi_q = traj_true.phi[1:].copy()
        phi_omega = traj_true.phi[nt].copy()
    elif targets == "fields":
        phi_q_slice = generate_field(gr, sc.raw("phi_q", "constant 0.5")[0], rng, base_dir)
        phi_q = np.repeat(phi_q_slice[None, :, :], nt, axis=0)
        phi_omega = generate_field(gr, sc.raw("phi_omega", "constant 0.5")[0], rng, base_dir)
    else:
        raise ConfigError("[control]: targets must be 'simulation' or 'fields'")

    cs = ControlSpec(b1=b1, b2=b2, b3=b3, phi_q=phi_q, phi_omega=phi_omega, u_max=u_max)
    try:
        cs.validate()
        u0.validate()
    except AdmissibilityError as exc:
        raise ConfigError(f"[control]: {exc}") from exc

    so = _Section("optimize", sections.get("optimize", {}))
    opts = OptimizeOptions(
        tol_stat=so.number("tol_stat", "1e-6"),
        max_iters=so.integer("max_iters", "200"),
        armijo_c=so.number("armijo_c", "1e-4"),
        backtrack=so.number("backtrack", "0.5"),
        s_stab=s_stab,
        flux_scheme=flux_scheme,
    )

    return RunConfig(
        grid=gr,
        model=model,
        init=init,
        control_spec=cs,
        u0=u0,
        T=T,
        nt=nt,
        s_stab=s_stab,
        flux_scheme=flux_scheme,
        opts=opts,
        seed=seed,
        u_true=u_true,
        raw={"sections": sections, "top": top},
    )
