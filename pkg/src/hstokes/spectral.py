"""Fourier-multiplier realizations of the nonlocal operators.

All transforms act on the trailing spatial axes of an array.  Odd symbols
(derivatives, Riesz transforms, projector cross terms) use wavenumbers with
the Nyquist entries zeroed so that the multipliers stay Hermitian on even
grids; even symbols (heat, harmonic extension) use the true wavenumbers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .domain import GridSpec

__all__ = [
    "Torus",
    "SpectralSlice",
    "set_threads",
    "get_threads",
    "riesz",
    "riesz_tangential",
    "leray_project",
    "divergence",
    "gradient",
    "harmonic_extension",
    "heat_propagate",
]

_THREADS: int | None = None


def set_threads(n: int | None) -> None:
    """Cap the FFT worker count (``None`` falls back to ``HSTOKES_THREADS`` or 1)."""
    global _THREADS
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = n


def get_threads() -> int:
    if _THREADS is not None:
        return _THREADS
    env = os.environ.get("HSTOKES_THREADS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class Torus:
    """A periodic box; ``component_axes[c]`` is the array axis of coordinate ``c``."""

    lengths: tuple[float, ...]
    shape: tuple[int, ...]
    component_axes: tuple[int, ...]

    @classmethod
    def full(cls, grid: GridSpec) -> "Torus":
        """Doubled box ``[-H, H) x [0, L)^(n-1)``, normal axis first."""
        lengths = (2.0 * grid.height_h,) + (grid.period_l,) * (grid.dim - 1)
        comp = tuple(range(1, grid.dim)) + (0,)
        return cls(lengths, grid.full_shape, comp)

    @classmethod
    def tangential(cls, grid: GridSpec) -> "Torus":
        lengths = (grid.period_l,) * (grid.dim - 1)
        return cls(lengths, grid.tangential_shape, tuple(range(grid.dim - 1)))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.ndim, 0))

    def _axis_k(self, axis: int, zero_nyquist: bool) -> np.ndarray:
        n = self.shape[axis]
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.lengths[axis] / n)
        if zero_nyquist and n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * self.ndim
        shape[axis] = n
        return k.reshape(shape)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Per-component wavenumbers (Nyquist zeroed), broadcastable to ``shape``."""
        return tuple(self._axis_k(a, True) for a in self.component_axes)

    @cached_property
    def k_true(self) -> tuple[np.ndarray, ...]:
        return tuple(self._axis_k(a, False) for a in self.component_axes)

    @cached_property
    def k_norm(self) -> np.ndarray:
        return np.sqrt(sum(np.broadcast_to(kc * kc, self.shape) for kc in self.k))

    @cached_property
    def k2_true(self) -> np.ndarray:
        return sum(np.broadcast_to(kc * kc, self.shape) for kc in self.k_true)

    def fft(self, a: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(a, axes=self.axes, workers=get_threads())

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(a, axes=self.axes, workers=get_threads()).real


@dataclass(frozen=True, eq=False)
class SpectralSlice:
    """Mode coefficients of a real field on a torus (unnormalized DFT)."""

    coeffs: np.ndarray
    torus: Torus

    @classmethod
    def from_real(cls, f: np.ndarray, torus: Torus) -> "SpectralSlice":
        return cls(torus.fft(np.asarray(f, dtype=float)), torus)

    def to_real(self) -> np.ndarray:
        return self.torus.ifft(self.coeffs)

    def hermitian_defect(self) -> float:
        """Relative mismatch between ``c(k)`` and ``conj(c(-k))``."""
        c = self.coeffs
        flipped = c
        for ax in self.torus.axes:
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        scale = max(np.abs(c).max(), np.finfo(float).tiny)
        return float(np.abs(c - np.conj(flipped)).max() / scale)

    def parseval_defect(self, f: np.ndarray) -> float:
        n = int(np.prod(self.torus.shape))
        spatial = np.sum(np.abs(f) ** 2)
        spectral = np.sum(np.abs(self.coeffs) ** 2) / n
        return float(abs(spatial - spectral) / max(spatial, np.finfo(float).tiny))


def _safe_inv(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    np.divide(1.0, x, out=out, where=x > 0)
    return out


def riesz(j: int, f: np.ndarray, torus: Torus) -> np.ndarray:
    """Riesz transform along component ``j`` (0-based): symbol ``-i k_j/|k|``."""
    if not 0 <= j < len(torus.component_axes):
        raise ValueError(f"component index {j} out of range")
    mult = -1j * torus.k[j] * _safe_inv(torus.k_norm)
    return torus.ifft(mult * torus.fft(f))


def riesz_tangential(j: int, g: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Riesz transform on the wall torus; ``j < dim - 1``."""
    return riesz(j, g, Torus.tangential(grid))


def leray_project(v: np.ndarray, torus: Torus) -> np.ndarray:
    """Helmholtz projection of a vector field ``(..., ncomp, *shape)``.

    Mode-wise ``delta_ij - k_i k_j/|k|^2``; the mean passes through.
    """
    ncomp = len(torus.component_axes)
    if v.shape[-torus.ndim - 1] != ncomp:
        raise ValueError("component axis does not match the torus dimension")
    vh = torus.fft(v)
    inv2 = _safe_inv(torus.k_norm) ** 2
    ax = -torus.ndim - 1
    s = sum(torus.k[i] * np.take(vh, i, axis=ax) for i in range(ncomp))
    out = np.stack(
        [np.take(vh, j, axis=ax) - torus.k[j] * s * inv2 for j in range(ncomp)], axis=ax
    )
    return torus.ifft(out)


def divergence(v: np.ndarray, torus: Torus) -> np.ndarray:
    ncomp = len(torus.component_axes)
    vh = torus.fft(v)
    d = sum(1j * torus.k[i] * np.take(vh, i, axis=-torus.ndim - 1) for i in range(ncomp))
    return torus.ifft(d)


def gradient(f: np.ndarray, torus: Torus) -> np.ndarray:
    fh = torus.fft(f)
    return np.stack(
        [torus.ifft(1j * kc * fh) for kc in torus.k], axis=-torus.ndim - 1
    )


def harmonic_extension(b: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Bounded harmonic extension of wall data ``(..., *tan)`` into the half grid.

    Returns ``(..., n_normal, *tan)`` with mode-wise factor ``exp(-|k'| x_n)``.
    """
    torus = Torus.tangential(grid)
    bh = torus.fft(b)
    a = np.sqrt(torus.k2_true)
    decay = np.exp(-grid.xn.reshape((-1,) + (1,) * torus.ndim) * a)
    ext = np.expand_dims(bh, axis=-torus.ndim - 1) * decay
    return torus.ifft(ext)


def heat_propagate(fhat: SpectralSlice, t: float) -> SpectralSlice:
    """Heat semigroup on the torus: multiplier ``exp(-|k|^2 t)``."""
    if t < 0:
        raise ValueError(f"negative time {t}")
    if t == 0:
        return SpectralSlice(fhat.coeffs.copy(), fhat.torus)
    return SpectralSlice(fhat.coeffs * np.exp(-fhat.torus.k2_true * t), fhat.torus)
