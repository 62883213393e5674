"""Stokes solution on the truncated half space as ``u = v + V + grad phi + w``.

* ``v``: heat flow of the reflected initial velocity,
* ``V``: Duhamel integral of the projected force ``P div F`` (even reflection of ``F``),
* ``grad phi``: harmonic gradient fixing the normal wall velocity,
* ``w``: boundary propagator correcting the tangential wall velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .domain import BoundaryField, GridSpec, SpaceTimeField, boundary_trace
from .extension import (
    CompatibilityError,
    CompatibilityReport,
    check_compatibility,
    extend_initial,
    extend_tensor,
    restrict,
)
from .kernels import SolonnikovKernelTable, duhamel_force, heat_evolve, solonnikov_w
from .spectral import Torus

__all__ = [
    "StokesData",
    "StokesSolution",
    "wall_riesz",
    "grad_phi",
    "build_G",
    "solve_stokes",
]


@dataclass(frozen=True, eq=False)
class StokesData:
    """Initial velocity ``h`` (``(dim, *space)`` or ``None``), wall data ``g``, force potential ``F``.

    ``h_full`` optionally overrides the reflection extension of ``h`` with an
    explicit doubled-torus field of shape ``(dim, *full_shape)``.
    """

    g: BoundaryField
    h: np.ndarray | None = None
    F: SpaceTimeField | None = None
    alpha: float = 0.5
    h_full: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.F is not None and self.F.kind != "tensor":
            raise ValueError("F must be a tensor field")

    @property
    def grid(self) -> GridSpec:
        return self.g.grid

    def h_values(self) -> np.ndarray:
        grid = self.grid
        return np.zeros((grid.dim, *grid.space_shape)) if self.h is None else np.asarray(self.h)

    def with_force(self, F: SpaceTimeField | None) -> "StokesData":
        return StokesData(self.g, self.h, F, self.alpha, self.h_full)

    def compatibility(self, tol: float = 1e-6) -> CompatibilityReport:
        return check_compatibility(self.h, self.g, tol)


@dataclass(frozen=True, eq=False)
class StokesSolution:
    u: SpaceTimeField
    parts: dict[str, SpaceTimeField]
    G: BoundaryField
    diagnostics: dict[str, float] = field(default_factory=dict)


def wall_riesz(grid: GridSpec) -> tuple[np.ndarray, ...]:
    """Tangential Riesz multipliers ``-i k_j / |k'|`` used at the wall.

    ``k_j`` has its Nyquist entry zeroed while ``|k'|`` is the true modulus,
    so ``grad phi`` stays an exact mode-wise gradient on every mode; away from
    Nyquist modes this is the ordinary tangential Riesz transform.
    """
    torus = Torus.tangential(grid)
    a = np.sqrt(torus.k2_true)
    inv = np.zeros_like(a)
    np.divide(1.0, a, out=inv, where=a > 0)
    return tuple(-1j * kc * inv for kc in torus.k)


def grad_phi(data_n: BoundaryField) -> SpaceTimeField:
    """Harmonic gradient with normal wall value ``data_n``.

    Per tangential mode: tangential part ``(-i k_j/|k'|) e^{-|k'| x_n} d``,
    normal part ``e^{-|k'| x_n} d``; the mean of ``d`` gives a constant normal
    velocity.
    """
    grid = data_n.grid
    dim = grid.dim
    if data_n.values.ndim != dim:
        raise ValueError("data_n must be a scalar boundary field")
    torus = Torus.tangential(grid)
    a = np.sqrt(torus.k2_true)
    decay = np.exp(-grid.xn.reshape((-1,) + (1,) * (dim - 1)) * a)
    dh = torus.fft(data_n.values)[:, None] * decay
    mult = wall_riesz(grid)
    out = np.empty((grid.n_time, dim, *grid.space_shape))
    for j in range(dim - 1):
        out[:, j] = torus.ifft(mult[j] * dh)
    out[:, dim - 1] = torus.ifft(dh)
    return SpaceTimeField(grid, out, "grad_phi")


def build_G(g: BoundaryField, v: SpaceTimeField, V: SpaceTimeField) -> BoundaryField:
    """Tangential wall data left for the boundary propagator; the normal entry is 0."""
    grid = g.grid
    dim = grid.dim
    vt = boundary_trace(v).values
    Vt = boundary_trace(V).values
    d = g.values[:, dim - 1] - vt[:, dim - 1] - Vt[:, dim - 1]
    torus = Torus.tangential(grid)
    dh = torus.fft(d)
    mult = wall_riesz(grid)
    G = np.zeros_like(g.values)
    for j in range(dim - 1):
        G[:, j] = g.values[:, j] - vt[:, j] - Vt[:, j] - torus.ifft(mult[j] * dh)
    return BoundaryField(grid, G, "G")


def _heat_part(h_full: np.ndarray, grid: GridSpec) -> np.ndarray:
    torus = Torus.full(grid)
    vals = heat_evolve(h_full, grid.times, torus)
    return restrict(vals, grid)


def _force_part(F: SpaceTimeField | None, grid: GridSpec) -> np.ndarray:
    if F is None or not np.any(F.values):
        return np.zeros((grid.n_time, grid.dim, *grid.space_shape))
    torus = Torus.full(grid)
    return restrict(duhamel_force(extend_tensor(F), grid.dt, torus), grid)


def solve_stokes(
    data: StokesData,
    grid: GridSpec | None = None,
    *,
    tol: float = 1e-6,
    table: SolonnikovKernelTable | None = None,
    diagnostics: bool = True,
) -> StokesSolution:
    """Assemble the Stokes velocity for ``data``.

    Raises :class:`CompatibilityError` naming the violated rule when the data
    fail the compatibility checks at ``tol``.
    """
    grid = data.grid if grid is None else grid
    if grid != data.grid:
        raise ValueError("grid does not match the data")
    dim = grid.dim
    report = data.compatibility(tol)
    if data.h_full is not None:
        report = CompatibilityReport(
            report.trace_mismatch, report.divergence_sup, report.normal_trace_sup,
            report.gn_mean_sup, tol, {k: v for k, v in report.flags.items() if k != "normal_trace"},
        )
    if not report.passed:
        raise CompatibilityError("compatibility violated: " + "; ".join(report.violations()))

    h = data.h_values()
    h_full = data.h_full if data.h_full is not None else extend_initial(h, grid, tol=tol)
    v = SpaceTimeField(grid, _heat_part(h_full, grid), "v")
    V = SpaceTimeField(grid, _force_part(data.F, grid), "V")
    d = (data.g.values[:, dim - 1] - boundary_trace(v).values[:, dim - 1]
         - boundary_trace(V).values[:, dim - 1])
    gp = grad_phi(BoundaryField(grid, d, "data_n"))
    G = build_G(data.g, v, V)
    # G(., 0) is at the compatibility tolerance; remove the residue before propagating
    Gv = np.array(G.values)
    Gv[0] = 0.0
    G = BoundaryField(grid, Gv, "G")
    w = solonnikov_w(G, table)
    u = SpaceTimeField(grid, v.values + V.values + gp.values + w.values, "u")
    diag = {"compatibility_" + k: float(getattr(report, k)) for k in
            ("trace_mismatch", "divergence_sup", "normal_trace_sup", "gn_mean_sup")}
    if diagnostics:
        diag.update(solution_diagnostics(u, data))
    return StokesSolution(u, {"v": v, "V": V, "grad_phi": gp, "w": w}, G, diag)


def solution_diagnostics(u: SpaceTimeField, data: StokesData) -> dict[str, float]:
    """Trace, initial, divergence and weak-form measurements of ``u``."""
    h = data.h_values()
    tr = analysis.trace_error(u, h, data.g)
    hscale = max(float(np.abs(h).max()), 1.0)
    return {
        "initial_error": tr.initial / hscale,
        "boundary_error": tr.boundary,
        "boundary_error_interior": tr.boundary_interior,
        "divergence_relative": analysis.divergence_sup(u, relative=True),
        "weak_residual": analysis.weak_residual_stokes(u, data.F),
    }
