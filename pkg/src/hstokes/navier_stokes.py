"""Picard iteration ``u^{m+1} = Stokes(h, g, F - u^m (x) u^m)`` with contraction monitoring."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import anisotropic_seminorm
from .domain import BoundaryField, GridSpec, SpaceTimeField
from .stokes import StokesData, solve_stokes

__all__ = [
    "IterationConfig",
    "IterationTrace",
    "NonContraction",
    "HorizonUnderflow",
    "advective_flux",
    "picard_step",
    "picard_solve",
    "restrict_horizon",
    "auto_timestep",
]


class NonContraction(RuntimeError):
    """Increment ratios exceeded the threshold on consecutive steps, or a norm blew up."""

    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


class HorizonUnderflow(RuntimeError):
    def __init__(self, message: str, attempts: list):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class IterationConfig:
    m_max: int = 30
    contraction_threshold: float = 0.9
    stop_tol: float = 1e-6
    t_shrink: float = 0.5
    alpha: float = 0.5
    max_retries: int = 6
    norm_random_pairs: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.contraction_threshold < 1.0:
            raise ValueError("contraction threshold must lie in (0, 1)")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if not 0.0 < self.t_shrink < 1.0:
            raise ValueError("t_shrink must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass
class IterationTrace:
    """Per-step norms: ``u_norms[m-1] = |u^m|``, ``increments[m-1] = |u^{m+1} - u^m|``."""

    data_norm: float
    horizon: float
    u_norms: list[float] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def ratios(self) -> list[float | None]:
        out: list[float | None] = [None]
        for a, b in zip(self.increments[:-1], self.increments[1:]):
            out.append(b / a if a > 0 else None)
        return out[: len(self.increments)]

    @property
    def bound(self) -> float:
        """Largest iterate norm seen (the proxy for ``M``)."""
        return max(self.u_norms, default=0.0)

    @property
    def iterations(self) -> int:
        return len(self.increments)

    def monotone(self) -> bool:
        inc = self.increments[1:]
        return all(b <= a for a, b in zip(inc[:-1], inc[1:]))

    def rows(self) -> list[dict]:
        return [
            {"m": m + 1, "u_norm": un, "increment": inc, "ratio": r}
            for m, (un, inc, r) in enumerate(zip(self.u_norms, self.increments, self.ratios))
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "u_norm", "increment", "ratio"])
        for row in self.rows():
            w.writerow([row["m"], repr(row["u_norm"]), repr(row["increment"]),
                        "" if row["ratio"] is None else repr(row["ratio"])])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "data_norm": self.data_norm,
            "horizon": self.horizon,
            "bound": self.bound,
            "converged": self.converged,
            "rows": self.rows(),
        }, indent=2, sort_keys=True)


def field_norm(u: SpaceTimeField, cfg: IterationConfig) -> float:
    """L-infinity plus sampled space/time Hoelder seminorms."""
    return anisotropic_seminorm(u, cfg.alpha, "sampled", cfg.norm_random_pairs, cfg.seed).total


def data_norm(data: StokesData) -> float:
    total = float(np.abs(data.h_values()).max()) + float(np.abs(data.g.values).max())
    if data.F is not None:
        total += float(np.abs(data.F.values).max())
    return total


def advective_flux(u: SpaceTimeField) -> np.ndarray:
    """``-u (x) u`` laid out as ``F[k, i] = -u_k u_i``."""
    return -np.einsum("tk...,ti...->tki...", u.values, u.values)


def picard_step(u_m: SpaceTimeField, data: StokesData, **solve_kw) -> SpaceTimeField:
    """One Stokes solve with the advective flux of ``u_m`` added to the force."""
    if not np.any(u_m.values):
        return solve_stokes(data, diagnostics=False, **solve_kw).u
    F = advective_flux(u_m)
    if data.F is not None:
        F = F + data.F.values
    return solve_stokes(data.with_force(SpaceTimeField(u_m.grid, F, "F")),
                        diagnostics=False, **solve_kw).u


def picard_solve(data: StokesData, grid: GridSpec | None = None,
                 cfg: IterationConfig = IterationConfig()) -> tuple[SpaceTimeField, IterationTrace]:
    """Iterate until ``|U^m| <= stop_tol |u^{m+1}|`` or ``m = m_max``.

    Raises :class:`NonContraction` when ``|U^m| / |U^{m-1}|`` exceeds the
    threshold on two consecutive steps or any norm is non-finite.
    """
    grid = data.grid if grid is None else grid
    trace = IterationTrace(data_norm(data), grid.t_final)
    try:
        u = picard_step(SpaceTimeField.zeros(grid), data)
    except ValueError as exc:
        raise NonContraction(f"first Stokes solve failed: {exc}", trace) from exc
    over = 0
    un = field_norm(u, cfg)
    for m in range(1, cfg.m_max + 1):
        try:
            u_next = picard_step(u, data)
        except ValueError as exc:  # non-finite field
            raise NonContraction(f"iterate {m + 1} is not finite", trace) from exc
        inc = field_norm(u_next - u, cfg)
        nn = field_norm(u_next, cfg)
        if not (math.isfinite(un) and math.isfinite(inc) and math.isfinite(nn)):
            raise NonContraction(f"non-finite norm at m = {m}", trace)
        trace.u_norms.append(un)
        trace.increments.append(inc)
        ratio = trace.ratios[-1]
        if ratio is not None and ratio > cfg.contraction_threshold:
            over += 1
            if over >= 2:
                raise NonContraction(
                    f"increment ratio {ratio:.3g} above {cfg.contraction_threshold} twice in a row", trace
                )
        else:
            over = 0
        u, un = u_next, nn
        if inc == 0.0 or inc <= cfg.stop_tol * nn:
            trace.converged = True
            break
    return u, trace


def restrict_horizon(data: StokesData, n_time: int) -> StokesData:
    """The same data on the first ``n_time`` slices (time step unchanged)."""
    grid = data.grid.with_horizon(n_time)
    g = BoundaryField(grid, data.g.values[:n_time], data.g.name)
    F = None if data.F is None else SpaceTimeField(grid, data.F.values[:n_time], data.F.name)
    return StokesData(g, data.h, F, data.alpha, data.h_full)


def auto_timestep(data: StokesData, grid: GridSpec | None = None,
                  cfg: IterationConfig = IterationConfig()):
    """Run :func:`picard_solve`, shrinking the horizon on non-contraction.

    Returns ``(T_star, u, trace, attempts)`` where ``attempts`` lists
    ``(horizon, outcome)`` pairs.  Raises :class:`HorizonUnderflow` once the
    horizon would drop below four time steps or the retry cap is hit.
    """
    grid = data.grid if grid is None else grid
    attempts: list[tuple[float, str]] = []
    current = data
    for _ in range(cfg.max_retries + 1):
        try:
            u, trace = picard_solve(current, current.grid, cfg)
        except NonContraction as exc:
            attempts.append((current.grid.t_final, f"non-contraction: {exc}"))
            n_new = int(round((current.grid.n_time - 1) * cfg.t_shrink)) + 1
            if n_new - 1 < 4:
                raise HorizonUnderflow(
                    f"horizon {current.grid.dt * (n_new - 1):.4g} is below four time steps", attempts
                ) from exc
            current = restrict_horizon(current, n_new)
            continue
        attempts.append((current.grid.t_final, "accepted"))
        return current.grid.t_final, u, trace, attempts
    raise HorizonUnderflow(f"no contraction after {cfg.max_retries} retries", attempts)
