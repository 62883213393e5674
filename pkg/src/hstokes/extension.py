"""Reflection of half-grid data onto the doubled normal torus, and data checks.

The doubled torus has ``2 (n_normal - 1)`` normal points covering
``[0, 2H)``; node ``k >= n_normal`` mirrors node ``2 (n_normal - 1) - k``.
Tangential components reflect evenly, the normal component oddly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import discrete_divergence, discrete_gradient
from .domain import BoundaryField, GridSpec, SpaceTimeField

__all__ = [
    "CompatibilityError",
    "CompatibilityReport",
    "check_compatibility",
    "reflect",
    "extend_initial",
    "extend_tensor",
    "restrict",
]


class CompatibilityError(ValueError):
    """Data violate a compatibility rule; the message names the rule."""


def reflect(a: np.ndarray, axis: int, parity: int = 1) -> np.ndarray:
    """Even (``parity=1``) or odd (``parity=-1``) reflection of the normal axis."""
    a = np.asarray(a, dtype=float)
    n = a.shape[axis]
    mirror = np.take(a, np.arange(n - 2, 0, -1), axis=axis)
    return np.concatenate([a, parity * mirror], axis=axis)


def restrict(a: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Half-grid rows ``[0, H]`` of a doubled-torus array."""
    axis = a.ndim - grid.dim
    return np.take(a, np.arange(grid.n_normal), axis=axis)


@dataclass(frozen=True)
class CompatibilityReport:
    trace_mismatch: float
    divergence_sup: float
    normal_trace_sup: float
    gn_mean_sup: float
    tol: float
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def violations(self) -> list[str]:
        names = {
            "trace": "initial trace g(., 0) = h(., x_n = 0)",
            "divergence": "div h = 0",
            "normal_trace": "h_n(., x_n = 0) = 0 (needed for the reflection extension)",
            "flux": "zero tangential mean of g_n at every t",
        }
        return [names[k] for k, ok in self.flags.items() if not ok]


def check_compatibility(h: np.ndarray | None, g: BoundaryField, tol: float = 1e-6,
                        div_tol: float = 1e-3) -> CompatibilityReport:
    """Measure the compatibility hypotheses of ``(h, g)``.

    ``h`` has shape ``(dim, *space)`` or is ``None`` for zero initial data.
    Trace, normal-trace and flux gaps are absolute and compared with ``tol``.
    The discrete divergence carries finite-difference truncation error, so it
    passes when below ``div_tol * max(1, sup |grad h|)``.
    """
    grid = g.grid
    dim = grid.dim
    if g.values.shape[1:] != (dim, *grid.tangential_shape):
        raise ValueError("g must be a vector boundary field")
    if h is None:
        h = np.zeros((dim, *grid.space_shape))
    h = np.asarray(h, dtype=float)
    if h.shape != (dim, *grid.space_shape):
        raise ValueError(f"h has shape {h.shape}, expected {(dim, *grid.space_shape)}")
    trace = float(np.abs(g.values[0] - h[:, 0]).max())
    div = float(np.abs(discrete_divergence(h, grid)).max())
    grad_scale = float(np.abs(discrete_gradient(h, grid)).max())
    normal = float(np.abs(h[dim - 1, 0]).max())
    tan_axes = tuple(range(1, dim))
    mean = float(np.abs(g.values[:, dim - 1].mean(axis=tan_axes)).max())
    flags = {
        "trace": trace <= tol,
        "divergence": div <= div_tol * max(1.0, grad_scale),
        "normal_trace": normal <= tol,
        "flux": mean <= tol,
    }
    return CompatibilityReport(trace, div, normal, mean, tol, flags)


def extend_initial(h: np.ndarray, grid: GridSpec, tol: float = 1e-10) -> np.ndarray:
    """Reflect ``h`` of shape ``(dim, *space)`` onto the doubled torus.

    The result restricted to ``[0, H]`` is ``h`` bit for bit.
    """
    h = np.asarray(h, dtype=float)
    dim = grid.dim
    if h.shape != (dim, *grid.space_shape):
        raise ValueError(f"h has shape {h.shape}, expected {(dim, *grid.space_shape)}")
    normal = float(np.abs(h[dim - 1, 0]).max())
    if normal > tol * max(1.0, float(np.abs(h).max())):
        raise CompatibilityError(
            f"h_n at the wall is {normal:.3g}; the reflection extension needs h_n(., 0) = 0. "
            "Supply the full-space extension explicitly (StokesData.h_full)."
        )
    out = np.empty((dim, *grid.full_shape))
    for c in range(dim):
        out[c] = reflect(h[c], axis=0, parity=-1 if c == dim - 1 else 1)
    return out


def extend_tensor(F: SpaceTimeField | np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Even reflection of every component of a tensor field onto the doubled torus."""
    if isinstance(F, SpaceTimeField):
        grid, values = F.grid, F.values
    else:
        values = np.asarray(F, dtype=float)
    axis = values.ndim - grid.dim
    return reflect(values, axis=axis, parity=1)
