"""Binary field snapshots and trajectory directories.

Snapshot format (bit-exact):
    32-byte header: magic "CHKSFLD1", u32 nx, u32 ny, f64 lx, f64 ly
    payload: nx*ny little-endian float64, row-major with y as the outer
    loop and x as the inner loop.

Trajectory directories hold one snapshot per field per stored step,
named ``{field}_{step:06}.fld``, plus a ``series.csv`` with the per-step
scalar monitors.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .grid import Grid

MAGIC = b"CHKSFLD1"
_HEADER = struct.Struct("<8sIIdd")

SERIES_COLUMNS = [
    "step",
    "time",
    "energy",
    "mean_phi",
    "sigma_min",
    "sigma_max",
    "a_min",
    "clamp_events",
]


def write_field(path: str | Path, grid: Grid, data: np.ndarray) -> None:
    """Write one field snapshot (y outer, x inner, little-endian f64)."""
    if data.shape != grid.shape:
        raise ValueError("field shape does not match grid")
    payload = np.ascontiguousarray(data.T, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.nx, grid.ny, grid.lx, grid.ly))
        fh.write(payload.tobytes())


def read_field(path: str | Path) -> tuple[Grid, np.ndarray]:
    """Read a field snapshot back into (grid, data) with data shaped (nx, ny)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, nx, ny, lx, ly = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"not a field snapshot: bad magic {magic!r}")
        raw = fh.read(8 * nx * ny)
    data = np.frombuffer(raw, dtype="<f8").reshape(ny, nx).T.copy()
    return Grid(nx, ny, lx, ly), data


def write_trajectory(
    out_dir: str | Path,
    grid: Grid,
    fields: dict[str, np.ndarray],
    prefix: str = "",
) -> None:
    """Write per-step snapshots for each named field array of shape (nsteps, nx, ny)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, arr in fields.items():
        for k in range(arr.shape[0]):
            write_field(out / f"{prefix}{name}_{k:06}.fld", grid, arr[k])


def write_series(out_dir: str | Path, rows: list[dict]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "series.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SERIES_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_csv(path: str | Path, columns: list[str], rows: list[dict]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
