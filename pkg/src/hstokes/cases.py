"""Built-in problem definitions shared by the CLI, the acceptance suite and tests.

Every case is a set of closures ``g(x', t)``, ``h(x)`` and ``F(x, t)`` plus a
default grid; the closures are what the finite-difference oracles consume,
and :meth:`Case.data` samples them for the kernel pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .analysis import ramp
from .domain import GridSpec, load_field, make_grid, sample, sample_boundary
from .stokes import StokesData

__all__ = ["Case", "CASE_NAMES", "build_case", "vortex_initial", "load_data"]

CASE_NAMES = ("zero", "rayleigh-ramp", "tangential-mode", "normal-mode", "small-ns", "large-ns")

_DEFAULT_GRIDS = {
    "zero": dict(dim=2, L=2 * np.pi, H=14.0, n_tangential=16, n_normal=129, T=0.5, n_time=65),
    "rayleigh-ramp": dict(dim=2, L=2 * np.pi, H=8.0, n_tangential=4, n_normal=256, T=0.5, n_time=256),
    "tangential-mode": dict(dim=2, L=2 * np.pi, H=14.0, n_tangential=16, n_normal=257, T=0.5, n_time=129),
    "normal-mode": dict(dim=2, L=2 * np.pi, H=14.0, n_tangential=16, n_normal=257, T=0.5, n_time=129),
    "small-ns": dict(dim=2, L=2 * np.pi, H=14.0, n_tangential=16, n_normal=129, T=0.25, n_time=65),
    "large-ns": dict(dim=2, L=2 * np.pi, H=14.0, n_tangential=16, n_normal=129, T=1.0, n_time=65),
}

_DEFAULT_AMPLITUDE = {"small-ns": 0.1, "large-ns": 10.0}


def vortex_initial(amplitude: float, dim: int) -> Callable:
    """Divergence-free initial velocity vanishing at the wall.

    Curl of ``psi = A s^3 exp(-s^2) sin(x_1)``, ``s = x_n / 2``, in the ``(x_1, x_n)``
    plane.  ``psi`` is odd in ``x_n``, so the tangential velocity reflects
    evenly and the normal one oddly without loss of smoothness.
    """

    def h(x):
        x1, s = x[0], 0.5 * x[-1]
        e = np.exp(-s * s)
        comps = [0.5 * amplitude * (3.0 * s**2 - 2.0 * s**4) * e * np.sin(x1)]
        comps += [0.0 * s] * (dim - 2)
        comps.append(-amplitude * s**3 * e * np.cos(x1))
        return comps

    return h


@dataclass(frozen=True)
class Case:
    name: str
    kind: str  # "stokes" or "navier-stokes"
    grid: GridSpec
    g: Callable
    h: Callable | None = None
    F: Callable | None = None
    alpha: float = 0.5
    amplitude: float = 1.0

    def data(self) -> StokesData:
        g = sample_boundary(self.grid, self.g, "g")
        h = None
        if self.h is not None:
            h = sample(self.grid, lambda x, t: self.h(x), "h").values[0]
        F = None if self.F is None else sample(self.grid, self.F, "F")
        return StokesData(g, h, F, self.alpha)

    def with_grid(self, grid: GridSpec) -> "Case":
        return replace(self, grid=grid)

    def refined(self, normal: int = 2, time: int = 2, tangential: int = 1) -> "Case":
        g = self.grid
        return self.with_grid(make_grid(
            g.dim, g.period_l, g.height_h, g.n_tangential * tangential,
            (g.n_normal - 1) * normal + 1, g.t_final, (g.n_time - 1) * time + 1,
        ))


def _wall(dim: int, tangential: Callable | None, normal: Callable | None) -> Callable:
    def g(x, t):
        z = 0.0 * x[0]
        comps = [z + (tangential(x, t) if tangential else 0.0)]
        comps += [z] * (dim - 2)
        comps.append(z + (normal(x, t) if normal else 0.0))
        return comps

    return g


def build_case(name: str, grid: dict | None = None, amplitude: float | None = None,
               gn_offset: float = 0.0, h_amplitude: float = 0.0, alpha: float = 0.5,
               ramp_tau: float = 0.1) -> Case:
    """Instantiate a built-in case; ``grid`` overrides entries of the default grid.

    ``gn_offset`` adds a constant to ``g_n`` (for t > 0), which breaks the
    zero-flux rule and exists to exercise validation.  ``h_amplitude`` adds
    the :func:`vortex_initial` flow.
    """
    if name not in CASE_NAMES:
        raise ValueError(f"unknown case {name!r}; known: {', '.join(CASE_NAMES)}")
    params = dict(_DEFAULT_GRIDS[name])
    params.update(grid or {})
    gs = make_grid(params["dim"], params["L"], params["H"], params["n_tangential"],
                   params["n_normal"], params["T"], params["n_time"])
    dim = gs.dim
    A = _DEFAULT_AMPLITUDE.get(name, 1.0) if amplitude is None else float(amplitude)
    r = lambda t: ramp(t, ramp_tau)  # noqa: E731
    tan = nor = None
    kind = "stokes"
    if name == "rayleigh-ramp":
        tan = lambda x, t: A * r(t)  # noqa: E731
    elif name == "tangential-mode":
        tan = lambda x, t: A * r(t) * np.sin(x[0])  # noqa: E731
    elif name == "normal-mode":
        nor = lambda x, t: A * r(t) * np.sin(x[0])  # noqa: E731
    elif name in ("small-ns", "large-ns"):
        kind = "navier-stokes"
        tan = lambda x, t: A * r(t) * (1.0 + np.cos(x[0]))  # noqa: E731
        nor = lambda x, t: A * r(t) * np.sin(x[0])  # noqa: E731
    if gn_offset:
        base = nor
        nor = lambda x, t: (base(x, t) if base else 0.0) + gn_offset * r(t)  # noqa: E731
    h = vortex_initial(h_amplitude, dim) if h_amplitude else None
    return Case(name, kind, gs, _wall(dim, tan, nor), h, None, alpha, A)


def load_data(grid: GridSpec, g_path, h_path=None, F_path=None, alpha: float = 0.5) -> StokesData:
    """Data from files in the binary + JSON format; ``h`` is slice 0 of a stored field."""
    g = load_field(g_path)
    h = None if h_path is None else load_field(h_path).values[0]
    F = load_field(F_path) if F_path is not None else None
    if g.grid != grid:
        raise ValueError("g was stored on a different grid")
    return StokesData(g, h, F, alpha)
