"""Config grammar, load-time admissibility checks, CLI runs, file formats."""

import struct
from pathlib import Path

import numpy as np
import pytest

from chks.cli import main
from chks.config import ConfigError, generate_field, load_config
from chks.fields_io import read_field, write_field
from chks.grid import Grid

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, text, name="case.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


MINIMAL = """
seed = 7
[grid]
nx = 8
ny = 8
[model]
potential = regular
prolif = logistic
h0 = 0.5
[initial]
phi0 = constant 0.4
a0 = constant 0.8
n0 = constant 0.0
sigma0 = constant 0.5
[control]
b1 = 0.0
b2 = 0.0
b3 = 1.0
u0 = constant 0.2
[time]
T = 0.25
Nt = 8
"""


def test_minimal_config_accepted(tmp_path):
    cfg = load_config(write_cfg(tmp_path, MINIMAL))
    assert cfg.grid.nx == 8
    assert cfg.nt == 8
    assert cfg.seed == 7
    assert cfg.u0.values.shape == (8, 8, 8)


def test_bundled_configs_load():
    for name in ("simulate.cfg", "verify.cfg", "optimize_inverse_crime.cfg",
                 "trivial_optimum.cfg"):
        cfg = load_config(CONFIG_DIR / name)
        assert cfg.grid.nx == 16


def test_seed_override(tmp_path):
    path = write_cfg(tmp_path, MINIMAL)
    cfg = load_config(path, seed_override=123)
    assert cfg.seed == 123


def test_chi_out_of_range_cites_condition(tmp_path):
    bad = MINIMAL.replace("[model]", "[model]\nchi_phi = 1.5")
    with pytest.raises(ConfigError, match=r"\(2\.3\)"):
        load_config(write_cfg(tmp_path, bad))


def test_log_potential_zero_prolif_rejected(tmp_path):
    bad = MINIMAL.replace("potential = regular", "potential = logarithmic")
    bad = bad.replace("prolif = logistic\nh0 = 0.5", "prolif = zero")
    bad = bad.replace("phi0 = constant 0.4", "phi0 = constant 0.5")
    with pytest.raises(ConfigError, match=r"\(2\.11\)"):
        load_config(write_cfg(tmp_path, bad))


def test_nonpositive_a0_rejected(tmp_path):
    bad = MINIMAL.replace("a0 = constant 0.8", "a0 = constant 0.0")
    with pytest.raises(ConfigError, match=r"\(2\.12\)"):
        load_config(write_cfg(tmp_path, bad))


def test_sigma0_out_of_range_rejected(tmp_path):
    bad = MINIMAL.replace("sigma0 = constant 0.5", "sigma0 = constant 1.5")
    with pytest.raises(ConfigError, match=r"\(2\.13\)"):
        load_config(write_cfg(tmp_path, bad))


def test_inadmissible_u0_rejected(tmp_path):
    bad = MINIMAL.replace("u0 = constant 0.2", "u0 = constant -0.2")
    with pytest.raises(ConfigError, match=r"\(2\.14\)"):
        load_config(write_cfg(tmp_path, bad))


def test_parse_error_carries_line_number(tmp_path):
    bad = MINIMAL + "\nnot a statement\n"
    with pytest.raises(ConfigError, match=r"line \d+"):
        load_config(write_cfg(tmp_path, bad))


def test_nonfinite_proliferation_rejected(tmp_path):
    bad = MINIMAL.replace("h0 = 0.5", "h0 = inf")
    with pytest.raises(ConfigError, match=r"\(2\.4\)"):
        load_config(write_cfg(tmp_path, bad))


def test_negative_umax_rejected(tmp_path):
    bad = MINIMAL.replace("[control]", "[control]\nu_max = -1.0")
    with pytest.raises(ConfigError, match=r"\(6\.4\)|\(2\.15\)"):
        load_config(write_cfg(tmp_path, bad))


def test_cli_simulate_homogeneous_mean_phi_closed_form(tmp_path):
    # With zero proliferation and constant data, the mean_phi column of
    # series.csv follows the implicit-Euler decay (1 + m*tau)^-k exactly.
    text = MINIMAL.replace("prolif = logistic\nh0 = 0.5", "prolif = zero")
    text = text.replace("[model]", "[model]\nm = 2.0")
    out = tmp_path / "homog"
    assert main(["simulate", str(write_cfg(tmp_path, text)), "--out", str(out)]) == 0
    import csv

    with open(out / "series.csv") as fh:
        rows = list(csv.DictReader(fh))
    tau = 0.25 / 8
    for k, row in enumerate(rows):
        expected = 0.4 * (1.0 + 2.0 * tau) ** (-k)
        assert float(row["mean_phi"]) == pytest.approx(expected, rel=1e-12)


def test_phi0_outside_log_domain_rejected(tmp_path):
    bad = MINIMAL.replace("potential = regular", "potential = logarithmic")
    bad = bad.replace("prolif = logistic\nh0 = 0.5", "prolif = constant\nh0 = 0.5")
    bad = bad.replace("phi0 = constant 0.4", "phi0 = constant 1.4")
    with pytest.raises(ConfigError, match=r"\(2\.10\)"):
        load_config(write_cfg(tmp_path, bad))


def test_generator_field_ranges():
    grid = Grid(16, 16)
    rng = np.random.default_rng(5)
    f = generate_field(grid, "random_smooth 0.2 0.8 3", rng)
    assert f.min() == pytest.approx(0.2)
    assert f.max() == pytest.approx(0.8)
    c = generate_field(grid, "constant 0.7", rng)
    assert np.all(c == 0.7)
    cos = generate_field(grid, "cosine 0.5 0.2 1 1", rng)
    assert abs(cos - 0.5).max() <= 0.2 + 1e-12


def test_field_snapshot_roundtrip_bit_exact(tmp_path):
    grid = Grid(5, 3, 2.0, 1.0)
    data = np.random.default_rng(1).standard_normal(grid.shape)
    path = tmp_path / "f.fld"
    write_field(path, grid, data)
    grid2, data2 = read_field(path)
    assert grid2 == grid
    assert data2.tobytes() == data.tobytes()


def test_field_snapshot_layout(tmp_path):
    # 32-byte header {magic, u32 nx, u32 ny, f64 lx, f64 ly}, then
    # little-endian f64 row-major with y outer and x inner.
    grid = Grid(2, 2, 1.0, 1.0)
    data = np.array([[1.0, 3.0], [2.0, 4.0]])  # data[i, j], i = x index
    path = tmp_path / "f.fld"
    write_field(path, grid, data)
    raw = path.read_bytes()
    assert len(raw) == 32 + 8 * 4
    magic, nx, ny, lx, ly = struct.unpack("<8sIIdd", raw[:32])
    assert magic == b"CHKSFLD1"
    assert (nx, ny) == (2, 2)
    assert (lx, ly) == (1.0, 1.0)
    vals = struct.unpack("<4d", raw[32:])
    assert vals == (1.0, 2.0, 3.0, 4.0)  # (x0,y0), (x1,y0), (x0,y1), (x1,y1)


def test_cli_simulate_and_determinism(tmp_path):
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    cfg = str(CONFIG_DIR / "simulate.cfg")
    assert main(["simulate", cfg, "--out", str(out1)]) == 0
    assert main(["simulate", cfg, "--out", str(out2)]) == 0
    series1 = (out1 / "series.csv").read_bytes()
    series2 = (out2 / "series.csv").read_bytes()
    assert series1 == series2
    for snap in sorted(out1.glob("*.fld")):
        assert snap.read_bytes() == (out2 / snap.name).read_bytes()
    header = series1.decode().splitlines()[0]
    assert header == "step,time,energy,mean_phi,sigma_min,sigma_max,a_min,clamp_events"
    assert len(list(out1.glob("phi_*.fld"))) == 33


def test_cli_simulate_rejects_bad_config(tmp_path):
    bad = write_cfg(tmp_path, MINIMAL.replace("sigma0 = constant 0.5",
                                              "sigma0 = constant 1.5"))
    assert main(["simulate", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_cli_optimize_trivial(tmp_path):
    out = tmp_path / "opt"
    assert main(["optimize", str(CONFIG_DIR / "trivial_optimum.cfg"),
                 "--out", str(out)]) == 0
    text = (out / "optimize.csv").read_text().splitlines()
    assert text[0] == "iteration,cost,stationarity,step_size,backtracks"
    assert len(list(out.glob("control_*.fld"))) == 32
    assert len(list(out.glob("adj_p3_*.fld"))) == 33
    # final control is zero
    _, u_last = read_field(out / "control_000031.fld")
    assert np.abs(u_last).max() <= 1e-8


def test_cli_verify_duality_suite(tmp_path):
    out = tmp_path / "ver"
    rc = main(["verify", str(CONFIG_DIR / "verify.cfg"), "--suite", "duality",
               "--out", str(out)])
    assert rc == 0
    report = (out / "verify_report.csv").read_text()
    assert "duality" in report
    assert (out / "duality.csv").exists()


def test_cli_unknown_suite_errors(tmp_path):
    with pytest.raises(ValueError):
        main(["verify", str(CONFIG_DIR / "verify.cfg"), "--suite", "bogus",
              "--out", str(tmp_path / "x")])
