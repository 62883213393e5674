"""Norm estimators and verification functionals on half-grid fields.

Derivatives are spectral along the tangential axes and fourth-order finite
differences along ``x_n`` (one-sided at the two rows next to each end).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .domain import BoundaryField, GridSpec, SpaceTimeField
from .spectral import Torus

__all__ = [
    "normal_derivative",
    "discrete_gradient",
    "discrete_divergence",
    "HoelderReport",
    "anisotropic_seminorm",
    "TestField",
    "test_family",
    "weak_residual_stokes",
    "weak_residual_ns",
    "divergence_sup",
    "TraceErrors",
    "trace_error",
    "ramp",
    "linf_relative",
    "chain_constant",
    "periodic_seminorm",
]

EXACT_POINT_LIMIT = 100_000
RANDOM_PAIRS = 1_000_000


def ramp(t, tau: float = 0.1):
    """Smooth start ``1 - exp(-(t/tau)^2)``; vanishes to second order at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    return -np.expm1(-((t / tau) ** 2))


# -- discrete derivatives ----------------------------------------------------

_ROW0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_ROW1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def normal_derivative(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order derivative along ``axis`` on a nonperiodic uniform grid."""
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    n = a.shape[0]
    if n < 5:
        raise ValueError("need at least 5 normal nodes")
    out = np.empty_like(a)
    out[2:-2] = (a[:-4] - 8.0 * a[1:-3] + 8.0 * a[3:-1] - a[4:]) / 12.0
    out[0] = np.tensordot(_ROW0, a[:5], axes=(0, 0))
    out[1] = np.tensordot(_ROW1, a[:5], axes=(0, 0))
    out[-1] = -np.tensordot(_ROW0, a[::-1][:5], axes=(0, 0))
    out[-2] = -np.tensordot(_ROW1, a[::-1][:5], axes=(0, 0))
    return np.moveaxis(out / h, 0, axis)


def discrete_gradient(a: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Gradient of ``(..., *space)`` samples; the new axis sits just before space.

    Component order is ``(d_1, ..., d_{n-1}, d_n)``.
    """
    dim = grid.dim
    torus = Torus.tangential(grid)
    ah = torus.fft(a)
    parts = [torus.ifft(1j * kc * ah) for kc in torus.k]
    parts.append(normal_derivative(a, grid.dx_n, axis=a.ndim - dim))
    return np.stack(parts, axis=a.ndim - dim)


def discrete_divergence(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Divergence of vector samples ``(..., dim, *space)``."""
    dim = grid.dim
    cax = u.ndim - dim - 1
    torus = Torus.tangential(grid)
    total = normal_derivative(np.take(u, dim - 1, axis=cax), grid.dx_n, axis=u.ndim - dim - 1)
    for j in range(dim - 1):
        total = total + torus.ifft(1j * torus.k[j] * torus.fft(np.take(u, j, axis=cax)))
    return total


def divergence_sup(u: SpaceTimeField, relative: bool = False) -> float:
    """Sup of the discrete divergence, optionally divided by the sup of ``|grad u|``."""
    div = discrete_divergence(u.values, u.grid)
    sup = float(np.abs(div).max())
    if not relative:
        return sup
    scale = float(np.abs(discrete_gradient(u.values, u.grid)).max())
    return sup / scale if scale > 0 else sup


class TraceErrors(NamedTuple):
    initial: float
    boundary: float
    boundary_interior: float


def trace_error(u: SpaceTimeField, h: np.ndarray | None, g: BoundaryField | None) -> TraceErrors:
    """Sup gaps ``|u(0) - h|`` and ``|u|_{x_n} - g|`` at the wall row and first interior row."""
    vals = u.values
    ax = vals.ndim - u.grid.dim
    init = 0.0 if h is None else float(np.abs(vals[0] - np.asarray(h)).max())
    if g is None:
        return TraceErrors(init, 0.0, 0.0)
    row0 = np.take(vals, 0, axis=ax)
    row1 = np.take(vals, 1, axis=ax)
    return TraceErrors(
        init,
        float(np.abs(row0 - g.values).max()),
        float(np.abs(row1 - g.values).max()),
    )


# -- anisotropic Hoelder seminorms --------------------------------------------


@dataclass(frozen=True)
class HoelderReport:
    """L-infinity norm and discrete space/time Hoelder seminorms of a field.

    ``space_upper`` and ``time_upper`` bound the exact-mode values from the
    dyadic pairs by chaining; they are ``None`` in exact mode.
    """

    linf: float
    space_seminorm: float
    time_seminorm: float
    alpha: float
    mode: str
    pair_budget: dict = field(default_factory=dict)
    space_upper: float | None = None
    time_upper: float | None = None

    @property
    def total(self) -> float:
        return self.linf + self.space_seminorm + self.time_seminorm

    def scaled(self, lam: float) -> "HoelderReport":
        s = abs(lam)
        up = lambda v: None if v is None else s * v  # noqa: E731
        return HoelderReport(
            s * self.linf, s * self.space_seminorm, s * self.time_seminorm, self.alpha,
            self.mode, dict(self.pair_budget), up(self.space_upper), up(self.time_upper),
        )


def chain_constant(alpha: float, m: int) -> float:
    """Factor bounding all-pairs ratios by dyadic-pair ratios in ``m`` axes."""
    return m ** (1.0 - alpha / 2.0) / (1.0 - 2.0 ** (-alpha))


def _split(f: SpaceTimeField) -> np.ndarray:
    """Values as ``(n_time, C, *space)``."""
    v = f.values
    return v.reshape(v.shape[0], -1, *f.grid.space_shape)


def _pair_norm(d: np.ndarray, axis: int = 1) -> np.ndarray:
    return np.sqrt(np.sum(d * d, axis=axis))


def _stride_ratio(v: np.ndarray, grid: GridSpec, axis: int, step: int, alpha: float) -> float:
    """Max ratio over all pairs offset by ``step`` nodes along one spatial axis."""
    sp_axis = axis + 2  # after (time, component)
    if axis == 0:
        n = v.shape[sp_axis]
        if step >= n:
            return 0.0
        a = np.take(v, np.arange(step, n), axis=sp_axis)
        b = np.take(v, np.arange(0, n - step), axis=sp_axis)
        dist = step * grid.dx_n
    else:
        n = grid.n_tangential
        step_eff = min(step, n - step)
        if step_eff <= 0 or step > n // 2:
            return 0.0
        a = np.roll(v, -step, axis=sp_axis)
        b = v
        dist = step_eff * grid.dx_t
    return float(_pair_norm(a - b).max() / dist**alpha)


def _time_stride_ratio(v: np.ndarray, grid: GridSpec, lag: int, alpha: float) -> float:
    if lag >= v.shape[0]:
        return 0.0
    d = _pair_norm(v[lag:] - v[:-lag]).max()
    return float(d / (lag * grid.dt) ** (alpha / 2.0))


def _dyadic(n: int) -> list[int]:
    out, s = [], 1
    while s < n:
        out.append(s)
        s *= 2
    return out


def _coords_flat(grid: GridSpec) -> np.ndarray:
    """``(P, dim)`` node coordinates, normal first then tangential."""
    mesh = np.meshgrid(grid.xn, *([grid.xt] * (grid.dim - 1)), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _distance(ca: np.ndarray, cb: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Euclidean distance with periodic minimum image in the tangential axes."""
    d = np.abs(ca - cb)
    L = grid.period_l
    d[..., 1:] = np.minimum(d[..., 1:], L - d[..., 1:])
    return np.sqrt(np.sum(d * d, axis=-1))


def _exact_space(v: np.ndarray, grid: GridSpec, alpha: float) -> float:
    nt, nc = v.shape[:2]
    flat = v.reshape(nt, nc, -1)
    coords = _coords_flat(grid)
    P = coords.shape[0]
    best = 0.0
    chunk = max(1, int(2_000_000 // max(1, nt * nc * P)))
    for start in range(0, P, chunk):
        idx = slice(start, min(P, start + chunk))
        dist = _distance(coords[idx, None, :], coords[None, :, :], grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(dist > 0, dist ** (-alpha), 0.0)
        diff = flat[:, :, idx, None] - flat[:, :, None, :]
        ratio = _pair_norm(diff) * w[None]
        best = max(best, float(ratio.max()))
    return best


def _exact_time(v: np.ndarray, grid: GridSpec, alpha: float) -> float:
    return max((_time_stride_ratio(v, grid, lag, alpha) for lag in range(1, v.shape[0])), default=0.0)


def anisotropic_seminorm(
    f: SpaceTimeField,
    alpha: float,
    mode: str = "sampled",
    n_random: int = RANDOM_PAIRS,
    seed: int = 0,
) -> HoelderReport:
    """Discrete ``C^{alpha, alpha/2}`` quantities of ``f``.

    Vector/tensor differences are measured in the Euclidean (Frobenius) norm.
    ``exact`` enumerates every same-time spatial pair and every same-point
    time pair (allowed up to ``EXACT_POINT_LIMIT`` space-time points).
    ``sampled`` uses every pair at dyadic offsets along each axis (which
    includes nearest neighbours) plus ``n_random`` fixed-seed random pairs.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    grid = f.grid
    v = _split(f)
    linf = float(_pair_norm(v).max())
    if mode == "exact":
        npts = int(np.prod(grid.space_shape)) * grid.n_time
        if npts > EXACT_POINT_LIMIT:
            raise ValueError(f"exact mode limited to {EXACT_POINT_LIMIT} points, grid has {npts}")
        return HoelderReport(
            linf, _exact_space(v, grid, alpha), _exact_time(v, grid, alpha), alpha, "exact",
            {"space_pairs": "all", "time_pairs": "all"},
        )
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")

    space = 0.0
    for axis, n in enumerate(grid.space_shape):
        limit = n if axis == 0 else n // 2 + 1
        for step in _dyadic(limit):
            space = max(space, _stride_ratio(v, grid, axis, step, alpha))
    tim = 0.0
    for lag in _dyadic(grid.n_time):
        tim = max(tim, _time_stride_ratio(v, grid, lag, alpha))
    dyadic_space, dyadic_time = space, tim

    if n_random > 0:
        rng = np.random.default_rng(seed)
        nt = grid.n_time
        flat = v.reshape(nt, v.shape[1], -1)
        coords = _coords_flat(grid)
        P = coords.shape[0]
        ti = rng.integers(0, nt, n_random)
        pa = rng.integers(0, P, n_random)
        pb = rng.integers(0, P, n_random)
        dist = _distance(coords[pa], coords[pb], grid)
        keep = dist > 0
        d = _pair_norm(flat[ti, :, pa] - flat[ti, :, pb], axis=1)
        if np.any(keep):
            space = max(space, float((d[keep] / dist[keep] ** alpha).max()))
        if nt > 1:
            pt = rng.integers(0, P, n_random)
            sa = rng.integers(0, nt, n_random)
            sb = rng.integers(0, nt, n_random)
            keep = sa != sb
            d = _pair_norm(flat[sa, :, pt] - flat[sb, :, pt], axis=1)
            gap = np.abs(sa - sb) * grid.dt
            if np.any(keep):
                tim = max(tim, float((d[keep] / gap[keep] ** (alpha / 2.0)).max()))

    return HoelderReport(
        linf, space, tim, alpha, "sampled",
        {"dyadic": True, "random_pairs": int(n_random), "seed": int(seed)},
        space_upper=dyadic_space * chain_constant(alpha, grid.dim),
        time_upper=dyadic_time * chain_constant(alpha / 2.0, 1),
    )


def periodic_seminorm(f: np.ndarray, lengths: Sequence[float], alpha: float) -> float:
    """Exact spatial alpha-seminorm of a torus field ``(..., *shape)`` with minimum-image distance.

    Every pair is an offset, so the sup runs over all grid offsets; leading
    axes are treated as components (Euclidean norm).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    nd = len(lengths)
    shape = f.shape[-nd:]
    v = np.asarray(f, dtype=float).reshape(-1, *shape)
    axes = tuple(range(1, nd + 1))
    best = 0.0
    for offset in np.ndindex(*shape):
        if not any(offset):
            continue
        dist2 = 0.0
        for o, n, L in zip(offset, shape, lengths):
            d = min(o, n - o) * L / n
            dist2 += d * d
        diff = np.roll(v, offset, axis=axes) - v
        best = max(best, float(np.sqrt((diff * diff).sum(axis=0)).max()) / dist2 ** (alpha / 2.0))
    return best


# -- weak residuals ------------------------------------------------------------


def _bump(s: np.ndarray):
    """``b(s) = (1 - s^2)^6`` on ``|s| < 1`` with its first two derivatives."""
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 0.0)
    b = q**6
    db = -12.0 * s * q**5
    d2b = -12.0 * q**5 + 120.0 * s * s * q**4
    return b, db, d2b


@dataclass(frozen=True, eq=False)
class TestField:
    """A divergence-free test field with its time derivative and gradient.

    ``grad[:, i, k]`` holds ``d_k phi_i``.
    """

    __test__ = False  # not a pytest class

    phi: np.ndarray
    phi_t: np.ndarray
    grad: np.ndarray

    def divergence_defect(self) -> float:
        dim = self.phi.shape[1]
        div = sum(self.grad[:, i, i] for i in range(dim))
        scale = max(float(np.abs(self.grad).max()), np.finfo(float).tiny)
        return float(np.abs(div).max() / scale)


def _bump_potential(grid: GridSpec, centre: Sequence[float], radius: Sequence[float],
                    t_window: tuple[float, float]):
    """Potential ``psi = b_t(t) prod_a b((x_a - c_a)/r_a)`` with derivatives up to order two.

    Returns ``(psi, dpsi, d2psi, psi_t, dpsi_t)`` where spatial derivative
    axes follow component order ``(x_1, ..., x_n)``.
    """
    dim = grid.dim
    coords = grid.coordinates()
    L = grid.period_l
    parts = []
    for a in range(dim):
        s = coords[a] - centre[a]
        if a < dim - 1:
            s = (s + 0.5 * L) % L - 0.5 * L
        b, db, d2b = _bump(s / radius[a])
        parts.append((b, db / radius[a], d2b / radius[a] ** 2))
    t0, t1 = t_window
    tc, tr = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    bt, dbt, _ = _bump((grid.times - tc) / tr)
    dbt = dbt / tr

    def product(orders):
        out = np.ones(grid.space_shape)
        for a in range(dim):
            out = out * parts[a][orders[a]]
        return out

    zero = [0] * dim
    s0 = product(zero)
    s1 = []
    s2 = np.empty((dim, dim, *grid.space_shape))
    for a in range(dim):
        o = zero.copy()
        o[a] = 1
        s1.append(product(o))
        for b in range(dim):
            o2 = zero.copy()
            o2[a] += 1
            o2[b] += 1
            s2[a, b] = product(o2)
    s1 = np.stack(s1)
    tb = bt.reshape(-1, *([1] * dim))
    tdb = dbt.reshape(-1, *([1] * dim))
    return tb * s0, tb[:, None] * s1, tb[:, None, None] * s2, tdb * s0, tdb[:, None] * s1


def _curl_field(grid: GridSpec, centre, radius, window, direction=None) -> TestField:
    dim = grid.dim
    _, d1, d2, _, d1t = _bump_potential(grid, centre, radius, window)
    if dim == 2:
        # phi = (d_n psi, -d_1 psi)
        phi = np.stack([d1[:, 1], -d1[:, 0]], axis=1)
        phi_t = np.stack([d1t[:, 1], -d1t[:, 0]], axis=1)
        grad = np.stack([d2[:, 1], -d2[:, 0]], axis=1)
    else:
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
        # phi = grad psi x e
        def cross(v):
            return np.stack([
                v[:, 1] * e[2] - v[:, 2] * e[1],
                v[:, 2] * e[0] - v[:, 0] * e[2],
                v[:, 0] * e[1] - v[:, 1] * e[0],
            ], axis=1)
        phi = cross(d1)
        phi_t = cross(d1t)
        # grad[:, i, k] = d_k phi_i = cross of (d_k grad psi)
        grad = np.stack([cross(d2[:, :, k]) for k in range(dim)], axis=2)
    return TestField(phi, phi_t, grad)


def test_family(grid: GridSpec, size: int = 4, seed: int = 7) -> list[TestField]:
    """Fixed, reproducible family of compactly supported divergence-free test fields.

    Supports stay inside ``0.1 H0 < x_n < 0.9 H0`` (``H0 = min(H, 4)``) and
    strictly inside ``(0, T)``.
    """
    rng = np.random.default_rng(seed)
    dim = grid.dim
    L, T = grid.period_l, grid.t_final
    depth = min(grid.height_h, 4.0)
    out = []
    for _ in range(size):
        centre = [rng.uniform(0, L) for _ in range(dim - 1)]
        rn = rng.uniform(0.25, 0.4) * depth
        centre.append(rng.uniform(0.1 * depth + rn, 0.9 * depth - rn) if 0.8 * depth > 2 * rn else 0.5 * depth)
        radius = [rng.uniform(0.25, 0.45) * L for _ in range(dim - 1)] + [rn]
        t0 = rng.uniform(0.05, 0.25) * T
        t1 = rng.uniform(0.75, 0.95) * T
        direction = rng.normal(size=3) if dim == 3 else None
        out.append(_curl_field(grid, centre, radius, (t0, t1), direction))
    return out


def _residual(u: np.ndarray, F: np.ndarray | None, phi: TestField, grid: GridSpec,
              grad_u: np.ndarray) -> float:
    if phi.divergence_defect() > 1e-10:
        raise ValueError("test field is not divergence free")
    # grad_u[:, i, k] = d_k u_i
    integrand = np.sum(grad_u * phi.grad, axis=(1, 2)) - np.sum(u * phi.phi_t, axis=1)
    if F is not None:
        # F[:, k, i] pairs with d_k phi_i = grad[:, i, k]
        integrand = integrand + np.einsum("tki...,tik...->t...", F, phi.grad)
    gnorm = np.sqrt(np.sum(phi.grad**2, axis=(1, 2)))
    tnorm = np.sqrt(np.sum(phi.phi_t**2, axis=1))
    return float(abs(integrand.sum()) / (gnorm + tnorm).sum())


def weak_residual_stokes(u: SpaceTimeField, F: SpaceTimeField | None,
                         family: Sequence[TestField] | None = None) -> float:
    """Max normalized gap of the weak Stokes identity over the test family.

    Each gap ``|int int grad u : grad phi - u . phi_t + F : grad phi|`` is divided
    by ``int int (|phi_t| + |grad phi|)``; the common cell volume cancels.
    """
    grid = u.grid
    if family is None:
        family = test_family(grid)
    if not np.any(u.values) and (F is None or not np.any(F.values)):
        return 0.0
    grad_u = discrete_gradient(u.values, grid)
    Fv = None if F is None else F.values
    return max(_residual(u.values, Fv, phi, grid, grad_u) for phi in family)


def weak_residual_ns(u: SpaceTimeField, family: Sequence[TestField] | None = None,
                     F: SpaceTimeField | None = None) -> float:
    """Weak Navier-Stokes gap with the advective flux ``-u (x) u`` added to ``F``."""
    uu = -np.einsum("tk...,ti...->tki...", u.values, u.values)
    if F is not None:
        uu = uu + F.values
    return weak_residual_stokes(u, SpaceTimeField(u.grid, uu, "F"), family)


def linf_relative(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - b| / max|b|``."""
    scale = float(np.abs(b).max())
    err = float(np.abs(a - b).max())
    return err / scale if scale > 0 else err

