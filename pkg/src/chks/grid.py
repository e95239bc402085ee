"""Cell-centered 2-D grid, discrete Neumann operators, and fast solvers.

All PDE fields live at cell centers of a uniform rectangle: an array of
shape (nx, ny) indexed [i, j] with centers ((i+1/2)*hx, (j+1/2)*hy).
Homogeneous Neumann boundary conditions are built into every operator
through mirror ghost cells (the ghost value equals the adjacent interior
value, so the normal derivative across each boundary face is exactly zero).

Operators
---------
- laplacian(grid, f):          5-point stencil with mirror ghosts.
- gradient_faces(grid, f):     centered differences on interior faces,
                               zero on boundary faces.
- divergence(grid, flux):      conservative difference of face fluxes.
- chemotaxis_flux(...):        face flux a*grad(sigma), centered or upwind.
- helmholtz_solve(...):        (alpha*I - beta*Lap) x = b, direct by DCT
                               diagonalization; preconditioned CG when
                               alpha varies in space.
- ch_block_solve(...):         the coupled 2x2 per-mode system of a
                               semi-implicit Cahn-Hilliard step.

The mirrored 5-point Laplacian is diagonalized by the orthonormal DCT-II,
with 1-D eigenvalues -(2/h^2)(1 - cos(pi*k/n)); this makes the implicit
solves exact direct solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

# Fixed linear-solver tolerances.
DIRECT_RESIDUAL_TOL = 1e-12
CG_RELATIVE_TOL = 1e-12
CG_MAX_ITER_FACTOR = 10


class SolverError(RuntimeError):
    """Raised when a linear solve fails or an operator precondition is violated."""


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on the rectangle [0, lx] x [0, ly]."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain side lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays (x, y), each of shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class FaceFlux:
    """Normal flux on cell faces: fx on x-faces (nx+1, ny), fy on y-faces (nx, ny+1).

    Boundary faces must carry zero normal flux (discrete no-flux condition).
    """

    fx: np.ndarray
    fy: np.ndarray


def _check_finite(f: np.ndarray, name: str = "field") -> None:
    if not np.all(np.isfinite(f)):
        raise SolverError(f"{name} contains non-finite values")


def zero_flux(grid: Grid) -> FaceFlux:
    return FaceFlux(np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """5-point Laplacian with mirror ghost cells (zero normal derivative)."""
    _check_finite(f)
    p = np.pad(f, 1, mode="edge")
    return (p[2:, 1:-1] - 2.0 * f + p[:-2, 1:-1]) / grid.hx**2 + (
        p[1:-1, 2:] - 2.0 * f + p[1:-1, :-2]
    ) / grid.hy**2


def gradient_faces(grid: Grid, f: np.ndarray) -> FaceFlux:
    """Centered gradient on interior faces; boundary faces are zero."""
    _check_finite(f)
    fx = np.zeros((grid.nx + 1, grid.ny))
    fy = np.zeros((grid.nx, grid.ny + 1))
    fx[1:-1, :] = (f[1:, :] - f[:-1, :]) / grid.hx
    fy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return FaceFlux(fx, fy)


def divergence(grid: Grid, flux: FaceFlux) -> np.ndarray:
    """Conservative divergence of a face flux. Rejects nonzero boundary flux."""
    fx, fy = flux.fx, flux.fy
    if (
        np.any(fx[0, :] != 0.0)
        or np.any(fx[-1, :] != 0.0)
        or np.any(fy[:, 0] != 0.0)
        or np.any(fy[:, -1] != 0.0)
    ):
        raise SolverError("divergence requires zero flux on boundary faces")
    return (fx[1:, :] - fx[:-1, :]) / grid.hx + (fy[:, 1:] - fy[:, :-1]) / grid.hy


def face_average(grid: Grid, f: np.ndarray) -> FaceFlux:
    """Arithmetic mean of adjacent cells on interior faces; zero on boundary faces."""
    ax = np.zeros((grid.nx + 1, grid.ny))
    ay = np.zeros((grid.nx, grid.ny + 1))
    ax[1:-1, :] = 0.5 * (f[1:, :] + f[:-1, :])
    ay[:, 1:-1] = 0.5 * (f[:, 1:] + f[:, :-1])
    return FaceFlux(ax, ay)


def face_product_to_cells(grid: Grid, a: FaceFlux, b: FaceFlux) -> np.ndarray:
    """Cell average of the facewise dot product a.b.

    Each cell receives half of the product on its two x-faces plus half of
    the product on its two y-faces. This is the adjoint of cell-to-face
    arithmetic averaging composed with the face product, and is how
    advective terms like grad(sigma).grad(p) are brought back to centers.
    """
    qx = a.fx * b.fx
    qy = a.fy * b.fy
    return 0.5 * (qx[1:, :] + qx[:-1, :]) + 0.5 * (qy[:, 1:] + qy[:, :-1])


def chemotaxis_flux(
    grid: Grid, a: np.ndarray, sigma: np.ndarray, scheme: str = "centered"
) -> FaceFlux:
    """Face flux a_face * grad(sigma)_face.

    scheme='centered' takes the arithmetic mean of the two adjacent cells
    for a_face; scheme='upwind' takes the donor cell on the side the flux
    leaves, selected by the sign of the face gradient of sigma.
    """
    _check_finite(a, "a")
    _check_finite(sigma, "sigma")
    g = gradient_faces(grid, sigma)
    if scheme == "centered":
        af = face_average(grid, a)
        return FaceFlux(af.fx * g.fx, af.fy * g.fy)
    if scheme == "upwind":
        fx = np.zeros_like(g.fx)
        fy = np.zeros_like(g.fy)
        gx = g.fx[1:-1, :]
        gy = g.fy[:, 1:-1]
        donor_x = np.where(gx > 0.0, a[:-1, :], a[1:, :])
        donor_y = np.where(gy > 0.0, a[:, :-1], a[:, 1:])
        fx[1:-1, :] = donor_x * gx
        fy[:, 1:-1] = donor_y * gy
        return FaceFlux(fx, fy)
    raise ValueError(f"unknown chemotaxis flux scheme: {scheme!r}")


def chemotaxis_flux_linearized(
    grid: Grid,
    a: np.ndarray,
    sigma: np.ndarray,
    alpha: np.ndarray,
    omega: np.ndarray,
    scheme: str = "centered",
) -> FaceFlux:
    """Directional derivative of chemotaxis_flux at (a, sigma) along (alpha, omega).

    For the upwind scheme the donor selection is frozen at the base state,
    which is the derivative away from the measure-zero set where the face
    gradient of sigma vanishes.
    """
    g = gradient_faces(grid, sigma)
    gw = gradient_faces(grid, omega)
    if scheme == "centered":
        af = face_average(grid, a)
        alf = face_average(grid, alpha)
        return FaceFlux(alf.fx * g.fx + af.fx * gw.fx, alf.fy * g.fy + af.fy * gw.fy)
    if scheme == "upwind":
        fx = np.zeros_like(g.fx)
        fy = np.zeros_like(g.fy)
        gx = g.fx[1:-1, :]
        gy = g.fy[:, 1:-1]
        up_x = gx > 0.0
        up_y = gy > 0.0
        donor_a_x = np.where(up_x, a[:-1, :], a[1:, :])
        donor_a_y = np.where(up_y, a[:, :-1], a[:, 1:])
        donor_al_x = np.where(up_x, alpha[:-1, :], alpha[1:, :])
        donor_al_y = np.where(up_y, alpha[:, :-1], alpha[:, 1:])
        fx[1:-1, :] = donor_al_x * gx + donor_a_x * gw.fx[1:-1, :]
        fy[:, 1:-1] = donor_al_y * gy + donor_a_y * gw.fy[:, 1:-1]
        return FaceFlux(fx, fy)
    raise ValueError(f"unknown chemotaxis flux scheme: {scheme!r}")


def mean(grid: Grid, f: np.ndarray) -> float:
    """Cell average of f."""
    return float(f.mean())


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Discrete L2 pairing hx*hy*sum(f*g)."""
    return float(grid.cell_area * np.sum(f * g))


def norm_l2(grid: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(grid.cell_area) * np.linalg.norm(f.ravel()))


def grad_norm_sq(grid: Grid, f: np.ndarray) -> float:
    """Discrete integral of |grad f|^2 via face differences."""
    g = gradient_faces(grid, f)
    return grid.cell_area * float(np.sum(g.fx**2) + np.sum(g.fy**2))


@lru_cache(maxsize=32)
def _lap_eigenvalues(nx: int, ny: int, hx: float, hy: float) -> np.ndarray:
    """Eigenvalues of the mirrored 5-point Laplacian in DCT-II space, shape (nx, ny)."""
    kx = np.arange(nx)
    ky = np.arange(ny)
    lam_x = -(2.0 / hx**2) * (1.0 - np.cos(np.pi * kx / nx))
    lam_y = -(2.0 / hy**2) * (1.0 - np.cos(np.pi * ky / ny))
    return lam_x[:, None] + lam_y[None, :]


def lap_eigenvalues(grid: Grid) -> np.ndarray:
    return _lap_eigenvalues(grid.nx, grid.ny, grid.hx, grid.hy)


def _dct2(f: np.ndarray) -> np.ndarray:
    return sfft.dctn(f, type=2, norm="ortho")


def _idct2(fh: np.ndarray) -> np.ndarray:
    return sfft.idctn(fh, type=2, norm="ortho")


def helmholtz_solve(
    grid: Grid,
    b: np.ndarray,
    alpha: float | np.ndarray,
    beta: float,
) -> np.ndarray:
    """Solve (alpha*I - beta*Lap) x = b with homogeneous Neumann conditions.

    Scalar alpha > 0: exact direct solve by DCT diagonalization.
    Field alpha (spatially varying, min > 0): conjugate gradient
    preconditioned by the mean-coefficient direct solve.
    """
    _check_finite(b, "rhs")
    if beta < 0:
        raise SolverError("helmholtz_solve requires beta >= 0")
    if np.isscalar(alpha) or np.ndim(alpha) == 0:
        alpha = float(alpha)
        if alpha <= 0:
            raise SolverError("helmholtz_solve requires alpha > 0")
        lam = lap_eigenvalues(grid)
        return _idct2(_dct2(b) / (alpha - beta * lam))
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != grid.shape:
        raise SolverError("variable alpha must match the grid shape")
    if float(alpha.min()) <= 0:
        raise SolverError("helmholtz_solve requires alpha > 0 everywhere")
    return _helmholtz_cg(grid, b, alpha, beta)


def _helmholtz_cg(grid: Grid, b: np.ndarray, alpha: np.ndarray, beta: float) -> np.ndarray:
    """Preconditioned CG for (alpha(x)*I - beta*Lap) x = b."""
    alpha_bar = float(alpha.mean())
    lam = lap_eigenvalues(grid)
    denom = alpha_bar - beta * lam

    def apply_op(v):
        return alpha * v - beta * laplacian(grid, v)

    def precond(r):
        return _idct2(_dct2(r) / denom)

    b_norm = np.linalg.norm(b.ravel())
    if b_norm == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    max_iter = CG_MAX_ITER_FACTOR * grid.nx * grid.ny
    for _ in range(max_iter):
        ap = apply_op(p)
        pap = float(np.sum(p * ap))
        gamma = rz / pap
        x = x + gamma * p
        r = r - gamma * ap
        if np.linalg.norm(r.ravel()) <= CG_RELATIVE_TOL * b_norm:
            return x
        z = precond(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError("helmholtz CG did not converge within the iteration budget")


def ch_block_solve(
    grid: Grid,
    rhs_phi: np.ndarray,
    rhs_mu: np.ndarray,
    tau: float,
    s_stab: float,
    transpose: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the coupled pair { phi/tau - Lap mu = rhs_phi ; -Lap phi + s_stab*phi - mu = rhs_mu }.

    Both equations diagonalize in DCT space, leaving an independent 2x2
    system per mode. The determinant is bounded away from zero by -1/tau,
    so the solve is exact up to round-off. With transpose=True the
    transposed per-mode matrix is solved instead (same spectrum, same
    determinant); the backward adjoint sweep runs the block this way.
    """
    _check_finite(rhs_phi, "rhs_phi")
    _check_finite(rhs_mu, "rhs_mu")
    if tau <= 0:
        raise SolverError("ch_block_solve requires tau > 0")
    if s_stab < 0:
        raise SolverError("ch_block_solve requires s_stab >= 0")
    lam = lap_eigenvalues(grid)
    a11 = 1.0 / tau
    a12 = -lam
    a21 = s_stab - lam
    a22 = -1.0
    if transpose:
        a12, a21 = a21, a12
    det = a11 * a22 - a12 * a21
    if np.any(np.abs(det) < 1e-14):
        raise SolverError("ch_block_solve hit a singular mode")
    rp = _dct2(rhs_phi)
    rm = _dct2(rhs_mu)
    phi_hat = (rp * a22 - a12 * rm) / det
    mu_hat = (a11 * rm - a21 * rp) / det
    return _idct2(phi_hat), _idct2(mu_hat)
