"""Time-dependent kernels: heat evolution, the Duhamel force integral and the
boundary propagator mapping tangential wall data to a divergence-free Stokes
velocity with zero initial data.

The boundary propagator is evaluated per tangential Fourier mode.  Its symbol
depends on the mode only through ``a = |k'|`` and the direction ``k'/a``::

    K_ij = delta_ij Kd(a, x_n, tau) + (k_i k_j / a) Kc(a, x_n, tau)   (i < n)
    K_nj = i k_j Kc(a, x_n, tau)

with ``Kd = exp(-a^2 tau) x_n k(x_n, tau) / tau`` (the classical half-line
double-layer heat kernel) and ``Kc = 2 exp(-a^2 tau) J``, where
``J = int_0^{x_n} d_z k(z, tau) exp(-a (x_n - z)) dz`` and ``k`` is the unit
mass 1-D heat kernel.  ``Kd + a Kc + d_{x_n} Kc = 0``, so the propagated field
is divergence free mode by mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .domain import BoundaryField, GridSpec, SpaceTimeField
from .spectral import SpectralSlice, Torus, heat_propagate

__all__ = [
    "heat_evolve",
    "duhamel_force",
    "heat_kernel_1d",
    "composite_integral",
    "solonnikov_kernel_hat",
    "SolonnikovKernelTable",
    "kernel_table",
    "solonnikov_w",
]


def heat_evolve(h_full: np.ndarray, t, torus: Torus) -> np.ndarray:
    """Heat flow of a real torus field; ``t`` may be a scalar or a 1-D array of times."""
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("negative time")
    fh = SpectralSlice.from_real(h_full, torus)
    out = np.stack([heat_propagate(fh, float(s)).to_real() for s in times])
    return out if np.ndim(t) else out[0]


# -- exponential integrator ---------------------------------------------------


def _phi1(z: np.ndarray) -> np.ndarray:
    """``(1 - exp(-z)) / z``."""
    out = np.ones_like(z)
    big = z > 1e-8
    out[big] = -np.expm1(-z[big]) / z[big]
    small = ~big
    out[small] = 1.0 - 0.5 * z[small]
    return out


def _psi(z: np.ndarray) -> np.ndarray:
    """``(1 - exp(-z)(1 + z)) / z^2``, stable near zero."""
    out = np.empty_like(z)
    big = z > 0.5
    zb = z[big]
    out[big] = (1.0 - np.exp(-zb) * (1.0 + zb)) / zb**2
    zs = z[~big]
    acc = np.zeros_like(zs)
    for m in range(26, 1, -1):
        acc = acc * zs + (-1) ** m * (m - 1) / math.factorial(m)
    out[~big] = acc
    return out


def duhamel_force(F_full: np.ndarray, dt: float, torus: Torus) -> np.ndarray:
    """Particular solution ``V`` of ``V_t - Lap V = P div F``, ``V(0) = 0``.

    ``F_full`` has shape ``(n_time, d, d, *shape)`` with ``F[k, i]`` entering
    as ``f_i = d_k F_ki``.  Time integration is exact for ``F`` piecewise
    linear between slices.
    """
    F_full = np.asarray(F_full, dtype=float)
    d = len(torus.component_axes)
    n_time = F_full.shape[0]
    Fh = torus.fft(F_full)
    fh = [sum(1j * torus.k[k] * Fh[:, k, i] for k in range(d)) for i in range(d)]
    inv2 = np.zeros(torus.shape)
    np.divide(1.0, torus.k_norm**2, out=inv2, where=torus.k_norm > 0)
    s = sum(torus.k[i] * fh[i] for i in range(d))
    src = np.stack([fh[j] - torus.k[j] * s * inv2 for j in range(d)], axis=1)

    z = torus.k2_true * dt
    decay = np.exp(-z)
    w1 = dt * _psi(z)
    w2 = dt * _phi1(z) - w1
    Vh = np.zeros_like(src)
    for m in range(n_time - 1):
        Vh[m + 1] = decay * Vh[m] + w1 * src[m] + w2 * src[m + 1]
    return torus.ifft(Vh)


# -- boundary propagator -----------------------------------------------------


def heat_kernel_1d(x, tau):
    x = np.asarray(x, dtype=float)
    return np.exp(-(x * x) / (4.0 * tau)) / np.sqrt(4.0 * np.pi * tau)


def _integral_k_exp(a, x, tau):
    """``int_0^x k(z, tau) exp(-a (x - z)) dz`` in closed form via ``erfcx``."""
    sq = np.sqrt(tau)
    p = a * sq
    q = x / (2.0 * sq)
    pq = p - q
    ahead = np.where(
        pq >= 0,
        np.exp(-q * q) * special.erfcx(np.abs(pq)),
        2.0 * np.exp(p * p - 2.0 * p * q) - np.exp(-q * q) * special.erfcx(np.abs(pq)),
    )
    return 0.5 * (ahead - np.exp(-2.0 * p * q) * special.erfcx(p))


def composite_integral(a, x, tau, method: str = "closed", nodes: int = 64):
    """``J(a, x, tau) = int_0^x d_z k(z, tau) exp(-a (x - z)) dz``.

    ``method`` is ``"closed"`` (erfcx form), ``"gauss"`` (composite
    Gauss-Legendre with ``nodes`` points over ``[0, x]``) or ``"adaptive"``
    (``scipy.integrate.quad``; scalar arguments only).
    """
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("tau must be positive")
    if method == "closed":
        a, x, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, x, tau)))
        k0 = 1.0 / np.sqrt(4.0 * np.pi * tau)
        return heat_kernel_1d(x, tau) - k0 * np.exp(-a * x) - a * _integral_k_exp(a, x, tau)

    def integrand(z, a, x, tau):
        return -z / (2.0 * tau) * heat_kernel_1d(z, tau) * np.exp(-a * (x - z))

    if method == "adaptive":
        val, _ = integrate.quad(
            integrand, 0.0, float(x), args=(float(a), float(x), float(tau)),
            epsabs=1e-15, epsrel=1e-13, limit=200,
        )
        return val
    if method == "gauss":
        panels = max(1, nodes // 16)
        gx, gw = np.polynomial.legendre.leggauss(16)
        a, x, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, x, tau)))
        total = np.zeros(a.shape)
        h = x / panels
        for p in range(panels):
            z = (p + 0.5 * (gx[:, None] + 1.0)) * h[None] if a.ndim else (p + 0.5 * (gx + 1.0)) * h
            vals = integrand(z, a, x, tau)
            total = total + 0.5 * h * np.tensordot(gw, vals, axes=(0, 0))
        return total
    raise ValueError(f"unknown method {method!r}")


def _kd(a, x, tau):
    return x / tau * np.exp(-(a * a) * tau - x * x / (4.0 * tau)) / np.sqrt(4.0 * np.pi * tau)


def _kc(a, x, tau, method="closed"):
    return 2.0 * np.exp(-(a * a) * tau) * composite_integral(a, x, tau, method)


def solonnikov_kernel_hat(xi, x_n: float, tau: float, method: str = "closed") -> np.ndarray:
    """Tangential symbol of the boundary propagator, an ``n x (n-1)`` complex matrix.

    ``xi`` holds the ``n - 1`` tangential wavenumbers; row ``n - 1`` is the
    normal component.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if x_n < 0:
        raise ValueError("x_n must be nonnegative")
    xi = np.asarray(xi, dtype=float).reshape(-1)
    m = xi.size
    a = float(np.sqrt(np.sum(xi * xi)))
    kd = float(_kd(a, x_n, tau))
    kc = float(_kc(a, x_n, tau, method)) if x_n > 0 else 0.0
    out = np.zeros((m + 1, m), dtype=complex)
    out[:m, :m] = kd * np.eye(m)
    if a > 0:
        out[:m, :m] += np.outer(xi, xi) / a * kc
    out[m, :] = 1j * xi * kc
    return out


@dataclass(frozen=True, eq=False)
class SolonnikovKernelTable:
    """Product-integration weights of ``Kd`` and ``Kc`` against hat functions in time.

    ``wd[ia, ix, l]`` is the weight that multiplies ``G(t_m - l dt)`` in
    ``w(t_m)``; mode-independent except through ``a_values[ia]``.
    """

    a_values: np.ndarray
    xn: np.ndarray
    dt: float
    wd: np.ndarray
    wc: np.ndarray

    @property
    def n_lags(self) -> int:
        return self.wd.shape[-1]

    def decay_constant(self) -> float:
        """Largest ``|Kd|`` rescaled by ``tau^(1/2) (x_n^2 + tau)^(1/2)`` over the lag grid."""
        tau = self.dt * np.arange(1, self.n_lags + 1)
        x = self.xn[:, None]
        worst = 0.0
        for a in self.a_values:
            vals = np.abs(_kd(a, x, tau[None])) + np.abs(_kc(a, x, tau[None]))
            worst = max(worst, float(np.max(vals * np.sqrt(tau) * np.sqrt(x * x + tau))))
        return worst


_GAUSS_ORDER = 10
_GRADED_LEVELS = 40


def _moments(a: float, xn: np.ndarray, dt: float, n_int: int):
    """Zeroth and first moments of Kd, Kc on each interval ``[l dt, (l+1) dt]``.

    Uses ``sigma = sqrt(tau)``; the first interval is graded geometrically
    toward ``sigma = 0`` to resolve the ``tau ~ x_n^2`` peak.
    """
    gx, gw = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
    x = xn[:, None, None]
    m0d = np.zeros((xn.size, n_int))
    m1d = np.zeros_like(m0d)
    m0c = np.zeros_like(m0d)
    m1c = np.zeros_like(m0d)

    def accumulate(sig, wts, lo, col):
        tau = sig * sig
        jac = 2.0 * sig * wts
        frac = (tau - lo) / dt
        kd = _kd(a, x, tau) * jac
        kc = _kc(a, x, tau) * jac
        m0d[:, col] += kd.sum(axis=-1)
        m1d[:, col] += (kd * frac).sum(axis=-1)
        m0c[:, col] += kc.sum(axis=-1)
        m1c[:, col] += (kc * frac).sum(axis=-1)

    # first interval, geometric panels [s/2, s]
    top = math.sqrt(dt)
    edges = top * 2.0 ** -np.arange(_GRADED_LEVELS + 1)
    lo_e, hi_e = edges[1:], edges[:-1]
    half = 0.5 * (hi_e - lo_e)
    sig = (0.5 * (hi_e + lo_e))[:, None] + half[:, None] * gx[None]
    wts = half[:, None] * gw[None]
    accumulate(sig.reshape(1, -1), wts.reshape(1, -1), 0.0, slice(0, 1))

    if n_int > 1:
        panels = 1 + int(a * a * dt / 2.0)
        ls = np.arange(1, n_int)
        s_lo = np.sqrt(ls * dt)
        s_hi = np.sqrt((ls + 1) * dt)
        u = (np.arange(panels)[:, None] + 0.5 * (gx[None] + 1.0)) / panels
        wu = np.broadcast_to(gw[None] / (2.0 * panels), u.shape)
        span = (s_hi - s_lo)[:, None]
        sig = s_lo[:, None] + span * u.reshape(1, -1)
        wts = span * wu.reshape(1, -1)
        lo = (ls * dt)[:, None]
        # chunk over x to bound memory
        for start in range(0, xn.size, 64):
            sl = slice(start, start + 64)
            xs = xn[sl][:, None, None]
            tau = sig * sig
            jac = 2.0 * sig * wts
            frac = (tau - lo) / dt
            kd = _kd(a, xs, tau[None]) * jac[None]
            kc = _kc(a, xs, tau[None]) * jac[None]
            m0d[sl, 1:] = kd.sum(axis=-1)
            m1d[sl, 1:] = (kd * frac[None]).sum(axis=-1)
            m0c[sl, 1:] = kc.sum(axis=-1)
            m1c[sl, 1:] = (kc * frac[None]).sum(axis=-1)
    return m0d, m1d, m0c, m1c


def _hat_weights(m0: np.ndarray, m1: np.ndarray) -> np.ndarray:
    w = m0 - m1
    w[:, 1:] += m1[:, :-1]
    return w


@lru_cache(maxsize=16)
def _cached_table(a_key: tuple, x_key: tuple, dt: float, n_lags: int) -> SolonnikovKernelTable:
    a_values = np.array(a_key)
    xn = np.array(x_key)
    wd = np.zeros((a_values.size, xn.size, n_lags))
    wc = np.zeros_like(wd)
    with np.errstate(under="ignore"):
        for ia, a in enumerate(a_values):
            m0d, m1d, m0c, m1c = _moments(float(a), xn, dt, n_lags)
            wd[ia] = _hat_weights(m0d, m1d)
            wc[ia] = _hat_weights(m0c, m1c)
    for arr in (wd, wc):
        arr.flags.writeable = False
    return SolonnikovKernelTable(a_values, xn, dt, wd, wc)


def _mode_index(grid: GridSpec):
    torus = Torus.tangential(grid)
    a = np.sqrt(torus.k2_true)
    rounded = np.round(a, 12)
    a_values, inverse = np.unique(rounded, return_inverse=True)
    return torus, a, a_values, inverse.reshape(a.shape)


def kernel_table(grid: GridSpec) -> SolonnikovKernelTable:
    """Cached weight table for every distinct ``|k'|`` of ``grid``."""
    _, _, a_values, _ = _mode_index(grid)
    return _cached_table(
        tuple(float(v) for v in a_values),
        tuple(float(v) for v in grid.xn),
        float(grid.dt),
        grid.n_time - 1,
    )


def _convolve(weights: np.ndarray, data: np.ndarray, ndim_t: int) -> np.ndarray:
    """Causal lag convolution ``out[m] = sum_l weights[l] * data[m - l]`` for ``m - l >= 1``."""
    n_time = data.shape[0]
    x = np.expand_dims(data, axis=-ndim_t - 1)
    out = np.zeros(x.shape[:-ndim_t - 1] + weights.shape[1:], dtype=complex)
    for lag in range(n_time - 1):
        out[lag + 1 :] += weights[lag] * x[1 : n_time - lag]
    return out


def solonnikov_w(G: BoundaryField, table: SolonnikovKernelTable | None = None,
                 tol: float = 1e-10) -> SpaceTimeField:
    """Stokes velocity with zero initial data and wall data ``(G', 0)``.

    ``G`` carries either ``n - 1`` tangential components or all ``n`` with a
    vanishing normal one.  The wall row is assigned ``G`` exactly.
    """
    grid = G.grid
    dim = grid.dim
    vals = G.values
    ncomp = vals.shape[1] if vals.ndim > dim else 1
    scale = max(1.0, float(np.abs(vals).max()))
    if ncomp == dim:
        if np.abs(vals[:, dim - 1]).max() > tol * scale:
            raise ValueError("normal component of the wall data must vanish")
        vals = vals[:, : dim - 1]
    elif ncomp != dim - 1:
        raise ValueError(f"expected {dim - 1} or {dim} components, got {ncomp}")
    if np.abs(vals[0]).max() > tol * scale:
        raise ValueError("wall data must vanish at t = 0")

    torus, a, a_values, inverse = _mode_index(grid)
    if table is None:
        table = kernel_table(grid)
    ndim_t = dim - 1
    # weights gathered per mode: (lag, x_n, *tan)
    wd = np.moveaxis(table.wd[inverse], (-1, -2), (0, 1))
    wc = np.moveaxis(table.wc[inverse], (-1, -2), (0, 1))

    Gh = torus.fft(vals)
    kt = torus.k
    Gpar = sum(kt[j] * Gh[:, j] for j in range(ndim_t))
    inv_a = np.zeros_like(a)
    np.divide(1.0, a, out=inv_a, where=a > 0)

    conv_d = _convolve(wd, Gh, ndim_t)
    conv_c = _convolve(wc, Gpar, ndim_t)
    wh = np.empty((grid.n_time, dim, grid.n_normal, *grid.tangential_shape), dtype=complex)
    for i in range(ndim_t):
        wh[:, i] = conv_d[:, i] + (kt[i] * inv_a) * conv_c
    wh[:, dim - 1] = 1j * conv_c
    w = torus.ifft(wh)
    w[:, : dim - 1, 0] = vals
    w[:, dim - 1, 0] = 0.0
    return SpaceTimeField(grid, w, "w")
