"""Reference solvers that share no discretization with the kernel pipeline.

* ``rayleigh_1d``: Crank-Nicolson for the half-line heat equation with a
  Dirichlet wall value and a homogeneous ceiling.
* ``stokes_fd`` / ``ns_fd``: tangential Fourier modes, second-order finite
  differences in ``x_n`` (velocities on nodes, pressure on half nodes) and
  Crank-Nicolson in time.  Each step solves the velocity-pressure system
  exactly through its Schur complement, so the discrete divergence vanishes
  to roundoff after every step.  ``ns_fd`` adds the advective flux with
  second-order Adams-Bashforth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from .domain import GridSpec, SpaceTimeField, _as_array

__all__ = ["OracleConfig", "CFLViolation", "rayleigh_1d", "stokes_fd", "ns_fd", "oracle_grid"]


class CFLViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    """Resolution multipliers relative to the main grid and the ceiling condition."""

    normal_refine: int = 2
    time_refine: int = 2
    top: str = "dirichlet"
    cfl: float = 0.5

    def __post_init__(self):
        if self.normal_refine < 1 or self.time_refine < 1:
            raise ValueError("oracle resolution must not be coarser than the main grid")
        if self.top != "dirichlet":
            raise ValueError("only a homogeneous Dirichlet ceiling is supported")


def oracle_grid(grid: GridSpec, cfg: OracleConfig) -> GridSpec:
    return grid.refined(cfg.normal_refine, cfg.time_refine)


def rayleigh_1d(a: Callable[[float], float], xn: np.ndarray, T: float, n_time: int,
                substeps: int = 1) -> np.ndarray:
    """``u_t = u_xx`` on ``(0, H)``, ``u(0, t) = a(t)``, ``u(H, t) = 0``, ``u(x, 0) = 0``.

    ``xn`` is a uniform grid on ``[0, H]``; returns ``(n_time, len(xn))``.
    Each output interval is split into ``substeps`` Crank-Nicolson steps.
    """
    xn = np.asarray(xn, dtype=float)
    n = xn.size
    dx = xn[1] - xn[0]
    steps = (n_time - 1) * substeps
    dt = T / steps
    m = n - 2
    r = dt / (2.0 * dx * dx)
    ab = np.zeros((3, m))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    out = np.zeros((n_time, n))
    u = np.zeros(m)
    a_old = float(a(0.0))
    out[0, 0] = a_old
    for s in range(1, steps + 1):
        a_new = float(a(s * dt))
        rhs = (1.0 - 2.0 * r) * u
        rhs[1:] += r * u[:-1]
        rhs[:-1] += r * u[1:]
        rhs[0] += r * (a_old + a_new)
        u = linalg.solve_banded((1, 1), ab, rhs)
        a_old = a_new
        if s % substeps == 0:
            k = s // substeps
            out[k, 0] = a_new
            out[k, 1:-1] = u
    return out


# -- per-mode saddle-point stepper --------------------------------------------


def _axis_wavenumbers(n: int, L: float, half: bool) -> tuple[np.ndarray, np.ndarray]:
    k = 2.0 * np.pi * (np.fft.rfftfreq(n, d=L / n) if half else np.fft.fftfreq(n, d=L / n))
    kz = k.copy()
    if n % 2 == 0:
        kz[n // 2] = 0.0
    return k, kz


class _ModeStepper:
    """Crank-Nicolson step for one tangential mode with exact incompressibility.

    With ``A = I - dt/2 Lap`` (tridiagonal) the pressure solves the real
    symmetric Schur system ``S = dt (|k|^2 M A^-1 M^T + E A^-1 E^T)``, where
    ``M`` averages and ``E`` differences node values onto half nodes.
    """

    def __init__(self, kt: np.ndarray, a2: float, n_nodes: int, dx: float, dt: float):
        N = n_nodes - 1
        m = N - 1  # interior velocity nodes
        self.N, self.m, self.dx, self.dt = N, m, dx, dt
        self.kt = np.asarray(kt, dtype=float)
        self.k2 = float(np.sum(self.kt**2))
        self.a2 = a2
        r = 0.5 * dt / dx**2
        self.ab = np.zeros((3, m))
        self.ab[0, 1:] = -r
        self.ab[1, :] = 1.0 + 2.0 * r + 0.5 * dt * a2
        self.ab[2, :-1] = -r
        cols = np.zeros((m, 2 * N))
        cols[:, :N] = self._avg_t(np.eye(N))
        cols[:, N:] = self._diff_t(np.eye(N))
        sol = self._ainv(cols)
        S = dt * (self.k2 * self._avg(sol[:, :N]) + self._diff(sol[:, N:]))
        S = 0.5 * (S + S.T)
        if self.k2 == 0.0:
            pinv = np.linalg.pinv(S)
            self._solve_p = lambda b: pinv @ b
        else:
            factor = linalg.cho_factor(S)
            self._solve_p = lambda b: linalg.cho_solve(factor, b)

    # half-node operators acting on the leading axis
    @staticmethod
    def _avg(u):
        out = np.zeros((u.shape[0] + 1,) + u.shape[1:], dtype=u.dtype)
        out[:-1] += 0.5 * u
        out[1:] += 0.5 * u
        return out

    def _diff(self, u):
        out = np.zeros((u.shape[0] + 1,) + u.shape[1:], dtype=u.dtype)
        out[:-1] += u
        out[1:] -= u
        return out / self.dx

    @staticmethod
    def _avg_t(p):
        return 0.5 * (p[:-1] + p[1:])

    def _diff_t(self, p):
        return (p[:-1] - p[1:]) / self.dx

    def _ainv(self, b):
        if np.iscomplexobj(b):
            return self._ainv(b.real) + 1j * self._ainv(b.imag)
        return linalg.solve_banded((1, 1), self.ab, b)

    def _apply_b(self, u):
        r = 0.5 * self.dt / self.dx**2
        out = (1.0 - 2.0 * r - 0.5 * self.dt * self.a2) * u
        out[1:] += r * u[:-1]
        out[:-1] += r * u[1:]
        return out

    def step(self, u: np.ndarray, g_old: np.ndarray, g_new: np.ndarray,
             f_half: np.ndarray | None) -> np.ndarray:
        """``u``: interior values ``(dim, m)``; ``g_*``: wall values ``(dim,)``."""
        dt, dx = self.dt, self.dx
        dim = u.shape[0]
        rhs = self._apply_b(u.T)
        rhs[0] += 0.5 * dt * (g_old + g_new) / dx**2
        if f_half is not None:
            rhs = rhs + dt * f_half.T
        ustar = self._ainv(rhs)
        # divergence at half nodes, wall values included
        b = self._diff(ustar[:, dim - 1])
        b[0] -= g_new[dim - 1] / dx
        for j, kc in enumerate(self.kt):
            if kc != 0.0:
                bt = self._avg(ustar[:, j])
                bt[0] += 0.5 * g_new[j]
                b = b + 1j * kc * bt
        p = self._solve_p(b.real) + 1j * self._solve_p(b.imag)
        # discrete pressure gradient D^H p on interior nodes (sign absorbed in p)
        grad = np.empty((self.m, dim), dtype=complex)
        for j, kc in enumerate(self.kt):
            grad[:, j] = -1j * kc * self._avg_t(p)
        grad[:, dim - 1] = self._diff_t(p)
        return (ustar - dt * self._ainv(grad)).T


def _sample_wall(g: Callable, fine: GridSpec) -> np.ndarray:
    """``(n_time, dim, *tan)`` wall samples."""
    coords = fine.tangential_coordinates()
    shape = (fine.dim, *fine.tangential_shape)
    return np.stack([np.broadcast_to(_as_array(g(coords, t), fine.tangential_shape), shape)
                     for t in fine.times])


def _sample_space(fn: Callable, fine: GridSpec, t: float, shape: tuple[int, ...]) -> np.ndarray:
    arr = _as_array(fn(fine.coordinates(), t), fine.space_shape)
    return np.array(np.broadcast_to(arr, (*shape, *fine.space_shape)), dtype=float)


def _tan_fft(a: np.ndarray, dim: int) -> np.ndarray:
    """Half-spectrum transform over the tangential axes (real input)."""
    return np.fft.rfftn(a, axes=tuple(range(a.ndim - dim + 1, a.ndim)))


def _tan_ifft(a: np.ndarray, dim: int, n: int) -> np.ndarray:
    return np.fft.irfftn(a, s=(n,) * (dim - 1), axes=tuple(range(a.ndim - dim + 1, a.ndim)))


def _force_hat(F: np.ndarray, fine: GridSpec, kzs: list[np.ndarray]) -> np.ndarray:
    """Mode coefficients of ``f_i = d_k F_ki``; ``F`` is ``(dim, dim, *space)``."""
    dim = fine.dim
    Fh = _tan_fft(F, dim)
    f = np.zeros(Fh.shape[1:], dtype=complex)
    for i in range(dim):
        for k in range(dim - 1):
            f[i] += 1j * kzs[k] * Fh[k, i]
        f[i, 1:-1] += (Fh[dim - 1, i, 2:] - Fh[dim - 1, i, :-2]) / (2.0 * fine.dx_n)
    return f


def _mode_grid(fine: GridSpec):
    """Per-axis wavenumbers of the half spectrum, mode indices and broadcast ``k``."""
    dim = fine.dim
    n, L = fine.n_tangential, fine.period_l
    axes = [_axis_wavenumbers(n, L, half=(j == dim - 2)) for j in range(dim - 1)]
    shape = tuple(ax[0].size for ax in axes)
    kzs = [axes[j][1].reshape([-1 if a == j else 1 for a in range(dim - 1)]) for j in range(dim - 1)]
    modes = []
    for mode in np.ndindex(*shape):
        kt = np.array([axes[j][1][i] for j, i in enumerate(mode)])
        a2 = float(sum(axes[j][0][i] ** 2 for j, i in enumerate(mode)))
        modes.append((mode, kt, a2))
    return modes, kzs


def _subsample(fine_vals: np.ndarray, grid: GridSpec, cfg: OracleConfig) -> np.ndarray:
    return fine_vals[:: cfg.time_refine, :, :: cfg.normal_refine]


def stokes_fd(h: Callable | None, g: Callable, F: Callable | None, grid: GridSpec,
              cfg: OracleConfig = OracleConfig(), fine_output: bool = False) -> SpaceTimeField:
    """Reference Stokes velocity on ``grid``, computed on the refined oracle grid.

    ``h(x)`` and ``F(x, t)`` take node coordinate tuples ``(x_1, ..., x_n)``;
    ``g(x', t)`` takes wall coordinates.  All return nested component sequences.
    """
    fine = oracle_grid(grid, cfg)
    dim = fine.dim
    modes, kzs = _mode_grid(fine)
    gw = _tan_fft(_sample_wall(g, fine), dim)
    h0 = np.zeros((dim, *fine.space_shape)) if h is None else _sample_space(
        lambda x, t: h(x), fine, 0.0, (dim,))
    u0 = _tan_fft(h0, dim)
    if F is not None:
        fh = [_force_hat(_sample_space(F, fine, t, (dim, dim)), fine, kzs) for t in fine.times]
    out = np.zeros((fine.n_time, *u0.shape), dtype=complex)
    for mode, kt, a2 in modes:
        stepper = _ModeStepper(kt, a2, fine.n_normal, fine.dx_n, fine.dt)
        u = u0[(slice(None), slice(1, -1)) + mode]
        out[(0, slice(None), slice(None)) + mode] = u0[(slice(None), slice(None)) + mode]
        out[(0, slice(None), 0) + mode] = gw[(0, slice(None)) + mode]
        for s in range(1, fine.n_time):
            f_half = None
            if F is not None:
                f_half = 0.5 * (fh[s - 1][(slice(None), slice(1, -1)) + mode]
                                + fh[s][(slice(None), slice(1, -1)) + mode])
            u = stepper.step(u, gw[(s - 1, slice(None)) + mode], gw[(s, slice(None)) + mode], f_half)
            out[(s, slice(None), slice(1, -1)) + mode] = u
            out[(s, slice(None), 0) + mode] = gw[(s, slice(None)) + mode]
    vals = _tan_ifft(out, dim, fine.n_tangential)
    if fine_output:
        return SpaceTimeField(fine, vals, "u_fd")
    return SpaceTimeField(grid, _subsample(vals, grid, cfg), "u_fd")


def _advective_force(u: np.ndarray, fine: GridSpec, kzs: list[np.ndarray]) -> np.ndarray:
    """Mode coefficients of ``-div(u (x) u)`` from physical ``u`` of shape ``(dim, *space)``."""
    flux = -np.einsum("k...,i...->ki...", u, u)
    return _force_hat(flux, fine, kzs)


def ns_fd(h: Callable | None, g: Callable, grid: GridSpec,
          cfg: OracleConfig = OracleConfig(), fine_output: bool = False) -> SpaceTimeField:
    """Reference Navier-Stokes velocity; the advective flux is explicit (AB2)."""
    fine = oracle_grid(grid, cfg)
    dim = fine.dim
    modes, kzs = _mode_grid(fine)
    gw = _tan_fft(_sample_wall(g, fine), dim)
    h0 = np.zeros((dim, *fine.space_shape)) if h is None else _sample_space(
        lambda x, t: h(x), fine, 0.0, (dim,))
    u0 = _tan_fft(h0, dim)
    steppers = {}
    for mode, kt, a2 in modes:
        steppers[mode] = _ModeStepper(kt, a2, fine.n_normal, fine.dx_n, fine.dt)
    uh = u0.copy()
    uh[:, 0] = gw[0]
    out = np.zeros((fine.n_time, dim, *fine.space_shape))
    out[0] = _tan_ifft(uh, dim, fine.n_tangential)
    hmin = min(fine.dx_n, fine.dx_t)
    n_prev = None
    for s in range(1, fine.n_time):
        phys = out[s - 1]
        umax = float(np.abs(phys).max())
        if umax * fine.dt / hmin > cfg.cfl:
            raise CFLViolation(f"CFL number {umax * fine.dt / hmin:.3g} exceeds {cfg.cfl}")
        n_cur = _advective_force(phys, fine, kzs)
        f_half = n_cur if n_prev is None else 1.5 * n_cur - 0.5 * n_prev
        n_prev = n_cur
        new = np.zeros_like(uh)
        for mode, stepper in steppers.items():
            sl = (slice(None), slice(1, -1)) + mode
            new[sl] = stepper.step(uh[sl], gw[(s - 1, slice(None)) + mode],
                                   gw[(s, slice(None)) + mode], f_half[sl])
        new[:, 0] = gw[s]
        uh = new
        out[s] = _tan_ifft(uh, dim, fine.n_tangential)
    if fine_output:
        return SpaceTimeField(fine, out, "u_fd")
    return SpaceTimeField(grid, _subsample(out, grid, cfg), "u_fd")
