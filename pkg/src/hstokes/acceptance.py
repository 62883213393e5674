"""Acceptance criteria as executable checks.

Each ``criterion_*`` function runs one check end to end at its stated
tolerance and returns a :class:`Criterion`.  The CLI ``verify`` command and
the test suite both call :func:`run_all`.
"""

from __future__ import annotations

import hashlib
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis, spectral
from .cases import build_case
from .domain import SpaceTimeField, make_grid
from .kernels import duhamel_force, heat_evolve
from .navier_stokes import HorizonUnderflow, IterationConfig, auto_timestep, picard_solve
from .oracle import ns_fd, rayleigh_1d, stokes_fd
from .spectral import Torus
from .stokes import solve_stokes

__all__ = ["Criterion", "CRITERIA", "run_all", "run_criterion"]


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    values: dict[str, float] = field(default_factory=dict)
    thresholds: dict[str, str] = field(default_factory=dict)
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = []
        for key, val in self.values.items():
            thr = self.thresholds.get(key)
            txt = f"{key}={val:.4g}" if isinstance(val, float) else f"{key}={val}"
            parts.append(f"{txt} ({thr})" if thr else txt)
        extra = f" [{self.detail}]" if self.detail else ""
        return f"[{status}] criterion {self.number:2d} {self.name}: " + ", ".join(parts) + extra


def _rel_half(u: SpaceTimeField, ref: SpaceTimeField) -> float:
    rows = u.grid.xn <= 0.5 * u.grid.height_h
    return analysis.linf_relative(u.values[:, :, rows], ref.values[:, :, rows])


# 1 -------------------------------------------------------------------------


def criterion_rayleigh() -> Criterion:
    case = build_case("rayleigh-ramp")
    grid = case.grid
    start = time.perf_counter()
    sol = solve_stokes(case.data(), diagnostics=False)
    runtime = time.perf_counter() - start
    xf = np.linspace(0.0, grid.height_h, 2 * (grid.n_normal - 1) + 1)
    ref = rayleigh_1d(lambda t: float(analysis.ramp(t)), xf, grid.t_final, grid.n_time, substeps=2)[:, ::2]
    u = sol.u.values
    err = analysis.linf_relative(u[:, 0, :, 0], ref)
    normal = float(np.abs(u[:, 1]).max())
    div = analysis.divergence_sup(sol.u)
    ok = err <= 0.02 and runtime < 30.0 and normal <= 1e-12 and div <= 1e-12
    return Criterion(
        1, "Rayleigh-ramp equivalence", ok,
        {"rel_linf": err, "runtime_s": runtime, "sup_u_n": normal, "sup_div": div},
        {"rel_linf": "<= 0.02", "runtime_s": "< 30", "sup_u_n": "<= 1e-12", "sup_div": "<= 1e-12"},
        f"n_normal={grid.n_normal}, n_time={grid.n_time}",
    )


# 2 -------------------------------------------------------------------------


def criterion_stokes_oracle() -> Criterion:
    values, thr, ok = {}, {}, True
    for name in ("tangential-mode", "normal-mode"):
        errs = []
        for nn, nt in ((129, 65), (257, 129)):
            case = build_case(name, grid=dict(n_normal=nn, n_time=nt))
            sol = solve_stokes(case.data(), diagnostics=False)
            ref = stokes_fd(case.h, case.g, case.F, case.grid)
            errs.append(_rel_half(sol.u, ref))
        order = math.log2(errs[0] / errs[1]) if errs[1] > 0 else math.inf
        key = name.split("-")[0]
        values[f"{key}_err"] = errs[1]
        values[f"{key}_err_coarse"] = errs[0]
        values[f"{key}_order"] = order
        thr[f"{key}_err"] = thr[f"{key}_err_coarse"] = "<= 0.05"
        thr[f"{key}_order"] = ">= 1"
        ok &= max(errs) <= 0.05 and order >= 1.0
    return Criterion(2, "Stokes oracle equivalence", ok, values, thr, "x_n <= H/2")


# 3 -------------------------------------------------------------------------


def criterion_ns_oracle() -> Criterion:
    case = build_case("small-ns")
    u, trace = picard_solve(case.data(), case.grid, IterationConfig())
    ref = ns_fd(case.h, case.g, case.grid)
    err = _rel_half(u, ref)
    return Criterion(3, "Navier-Stokes oracle equivalence", err <= 0.05 and trace.converged,
                     {"rel_linf": err, "iterations": trace.iterations},
                     {"rel_linf": "<= 0.05"}, "small-ns, amplitude 0.1, T = 0.25")


# 4 -------------------------------------------------------------------------


def _large_outcome(cfg: IterationConfig):
    case = build_case("large-ns")
    try:
        T_star, _, trace, attempts = auto_timestep(case.data(), case.grid, cfg)
        return ("accepted", T_star, tuple(trace.increments), tuple(a[0] for a in attempts))
    except HorizonUnderflow as exc:
        return ("underflow", None, (), tuple(a[0] for a in exc.attempts))


def criterion_contraction() -> Criterion:
    cfg = IterationConfig()
    case = build_case("small-ns")
    _, trace = picard_solve(case.data(), case.grid, cfg)
    ratios = [r for r in trace.ratios[1:] if r is not None]
    worst = max(ratios, default=0.0)
    geometric = trace.monotone() and trace.converged
    first = _large_outcome(cfg)
    second = _large_outcome(cfg)
    deterministic = first == second
    large_T = build_case("large-ns").grid.t_final
    recovered = first[0] == "underflow" or (first[1] is not None and first[1] < large_T)
    ok = worst <= 0.6 and geometric and deterministic and recovered
    detail = (f"large-ns: {first[0]}" + (f" at T*={first[1]:.4g}" if first[1] else "")
              + f" after {len(first[3])} attempt(s)")
    return Criterion(4, "Contraction", ok,
                     {"max_ratio": worst, "geometric": int(geometric), "deterministic": int(deterministic),
                      "large_recovered": int(recovered)},
                     {"max_ratio": "<= 0.6", "geometric": "== 1", "deterministic": "== 1",
                      "large_recovered": "== 1"}, detail)


# 5 -------------------------------------------------------------------------


def duhamel_corpus(seed: int = 1, alpha: float = 0.2, n: int = 64) -> tuple[np.ndarray, Torus]:
    """Fixed random-phase tensor field with spectrum ``|k|^{-alpha - d/2}`` on a 2-D torus."""
    torus = Torus((2.0 * np.pi, 2.0 * np.pi), (n, n), (1, 0))
    rng = np.random.default_rng(seed)
    k = np.sqrt(torus.k2_true)
    amp = np.zeros_like(k)
    amp[k > 0] = k[k > 0] ** (-alpha - 1.0)
    F = np.empty((2, 2, n, n))
    for a in range(2):
        for b in range(2):
            F[a, b] = torus.ifft(amp * np.exp(2j * np.pi * rng.random((n, n))))
    return F / np.abs(F).max(), torus


def criterion_duhamel() -> Criterion:
    F, torus = duhamel_corpus()
    horizons = (0.4, 0.1, 0.025)
    sups = []
    for T in horizons:
        nt = 65
        V = duhamel_force(np.broadcast_to(F, (nt, *F.shape)), T / (nt - 1), torus)
        sups.append(float(np.abs(V).max()))
    slope = float(np.polyfit(np.log(horizons), np.log(sups), 1)[0])
    return Criterion(5, "Duhamel scaling", abs(slope - 0.5) <= 0.15, {"slope": slope},
                     {"slope": "0.5 +/- 0.15"}, "T in {0.4, 0.1, 0.025}")


# 6 -------------------------------------------------------------------------


def heat_corpus(n: int = 64, seeds=(0, 1, 2), alpha: float = 0.5):
    torus = Torus((2.0 * np.pi, 2.0 * np.pi), (n, n), (1, 0))
    k = np.sqrt(torus.k2_true)
    amp = np.zeros_like(k)
    amp[k > 0] = k[k > 0] ** (-alpha - 1.0)
    out = []
    for s in seeds:
        rng = np.random.default_rng(s)
        f = torus.ifft(amp * np.exp(2j * np.pi * rng.random((n, n))))
        out.append(f / np.abs(f).max())
    return out, torus


HEAT_TIMES = (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)


def criterion_semigroup() -> Criterion:
    fields, torus = heat_corpus()
    alpha = 0.5
    worst_linf = worst_semi = -math.inf
    for f in fields:
        evo = heat_evolve(f, np.array(HEAT_TIMES), torus)
        linf = np.abs(evo).reshape(len(HEAT_TIMES), -1).max(axis=1)
        semi = np.array([analysis.periodic_seminorm(e, torus.lengths, alpha) for e in evo])
        worst_linf = max(worst_linf, float(np.max(np.diff(linf))))
        worst_semi = max(worst_semi, float(np.max(np.diff(semi))))
    ok = worst_linf <= 1e-10 and worst_semi <= 1e-8
    return Criterion(6, "Semigroup invariants", ok,
                     {"max_linf_increase": worst_linf, "max_seminorm_increase": worst_semi},
                     {"max_linf_increase": "<= 1e-10", "max_seminorm_increase": "<= 1e-8"},
                     f"times {HEAT_TIMES}")


# 7 -------------------------------------------------------------------------


def band_limited(torus: Torus, rng: np.random.Generator, lead: tuple[int, ...] = (), cutoff: float = 0.5):
    """Random real field whose modes beyond ``cutoff`` times Nyquist vanish."""
    shape = (*lead, *torus.shape)
    f = rng.normal(size=shape)
    fh = torus.fft(f)
    kmax = max(np.abs(k).max() for k in torus.k_true)
    mask = np.ones(torus.shape, bool)
    for k in torus.k_true:
        mask &= np.abs(np.broadcast_to(k, torus.shape)) <= cutoff * kmax
    return torus.ifft(fh * mask)


def criterion_operators() -> Criterion:
    torus = Torus((2.0, 3.0, 2.5), (16, 16, 16), (1, 2, 0))
    rng = np.random.default_rng(3)
    f = band_limited(torus, rng)
    v = band_limited(torus, rng, (3,))
    scale_f = np.abs(f).max()
    rr = sum(spectral.riesz(j, spectral.riesz(j, f, torus), torus) for j in range(3))
    e_rr = float(np.abs(rr + (f - f.mean())).max() / scale_f)
    pv = spectral.leray_project(v, torus)
    e_idem = float(np.abs(spectral.leray_project(pv, torus) - pv).max() / np.abs(pv).max())
    grad = spectral.gradient(f, torus)
    e_grad = float(np.abs(spectral.leray_project(grad, torus)).max() / np.abs(grad).max())
    e_div = float(np.abs(spectral.divergence(pv, torus)).max() / np.abs(spectral.gradient(pv, torus)).max())
    vals = {"riesz_square": e_rr, "idempotence": e_idem, "proj_grad": e_grad, "div_proj": e_div}
    return Criterion(7, "Operator algebra", all(x <= 1e-12 for x in vals.values()), vals,
                     {k: "<= 1e-12" for k in vals}, "3-D torus 16^3, band-limited fields")


# 8 -------------------------------------------------------------------------


def criterion_poisson() -> Criterion:
    grid = make_grid(3, 2 * np.pi, 6.0, 16, 65, 1.0, 2)
    x1, x2 = grid.tangential_coordinates()
    ext = spectral.harmonic_extension(np.sin(x1), grid)
    exact = np.exp(-grid.xn)[:, None, None] * np.sin(x1)[None]
    e_mode = float(np.abs(ext - exact).max())
    rng = np.random.default_rng(5)
    torus = Torus.tangential(grid)
    worst = 0.0
    for _ in range(20):
        b = band_limited(torus, rng)
        e = spectral.harmonic_extension(b, grid)
        worst = max(worst, float(np.abs(e).max() / np.abs(b).max()))
    ok = e_mode <= 1e-12 and worst <= 1.0 + 1e-12
    return Criterion(8, "Poisson extension", ok, {"single_mode_err": e_mode, "linf_ratio": worst},
                     {"single_mode_err": "<= 1e-12", "linf_ratio": "<= 1"}, "20 band-limited samples")


# 9 -------------------------------------------------------------------------


def criterion_structure() -> Criterion:
    alpha = 0.5
    values, thr, ok = {}, {}, True
    for name in ("tangential-mode", "normal-mode"):
        key = name.split("-")[0]
        traces = []
        for nn in (129, 257, 513):
            case = build_case(name, grid=dict(n_normal=nn), h_amplitude=0.5)
            sol = solve_stokes(case.data())
            if nn == 257:
                values[f"{key}_div"] = sol.diagnostics["divergence_relative"]
                values[f"{key}_initial"] = sol.diagnostics["initial_error"]
            traces.append(sol.diagnostics["boundary_error_interior"])
        orders = [math.log2(a / b) for a, b in zip(traces[:-1], traces[1:])]
        values[f"{key}_trace_order"] = min(orders)
        thr.update({f"{key}_div": "<= 1e-3", f"{key}_initial": "<= 1e-8",
                    f"{key}_trace_order": f">= alpha = {alpha}"})
        ok &= (values[f"{key}_div"] <= 1e-3 and values[f"{key}_initial"] <= 1e-8
               and min(orders) >= alpha)
    return Criterion(9, "Solution structure", ok, values, thr, "h = vortex flow, n_normal 129/257/513")


# 10 ------------------------------------------------------------------------

WEAK_LEVELS = ((16, 65, 33), (32, 129, 65), (64, 257, 129))


def spoil(u: SpaceTimeField, amplitude: float = 0.1) -> SpaceTimeField:
    """Add ``amplitude sin(x_1) ramp(t) e_n`` (not a Stokes solution)."""
    grid = u.grid
    x1 = grid.coordinates()[0]
    r = analysis.ramp(grid.times).reshape((-1,) + (1,) * grid.dim)
    vals = np.array(u.values)
    vals[:, grid.dim - 1] += amplitude * r * np.sin(x1)[None]
    return SpaceTimeField(grid, vals, "spoiled")


def criterion_weak() -> Criterion:
    true_res, bad_res, ns_res = [], [], []
    for nt_, nn, nt in WEAK_LEVELS:
        grid = dict(n_tangential=nt_, n_normal=nn, n_time=nt)
        case = build_case("tangential-mode", grid=grid)
        sol = solve_stokes(case.data(), diagnostics=False)
        true_res.append(analysis.weak_residual_stokes(sol.u, None))
        bad_res.append(analysis.weak_residual_stokes(spoil(sol.u), None))
        ns_case = build_case("small-ns", grid=grid)
        u, _ = picard_solve(ns_case.data(), ns_case.grid, IterationConfig())
        ns_res.append(analysis.weak_residual_ns(u))
    dec = all(b < a for a, b in zip(true_res[:-1], true_res[1:]))
    ns_dec = all(b < a for a, b in zip(ns_res[:-1], ns_res[1:]))
    floor = min(bad_res) / max(bad_res)
    ok = dec and ns_dec and floor >= 0.5 and min(bad_res) >= 100.0 * true_res[-1]
    return Criterion(10, "Weak-formulation residual", ok,
                     {"stokes_coarse": true_res[0], "stokes_fine": true_res[-1],
                      "ns_coarse": ns_res[0], "ns_fine": ns_res[-1],
                      "spoiled_min": min(bad_res), "spoiled_min_over_max": floor},
                     {"stokes_fine": "decreasing", "ns_fine": "decreasing",
                      "spoiled_min_over_max": ">= 0.5", "spoiled_min": ">= 100 x stokes_fine"},
                     "levels " + ", ".join(f"{a}x{b}x{c}" for a, b, c in WEAK_LEVELS))


# 11 ------------------------------------------------------------------------


def _digest(directory: Path) -> dict[str, str]:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.iterdir()) if p.is_file()}


def criterion_determinism() -> Criterion:
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "run.toml"
        cfg.write_text('[run]\ncase = "small-ns"\n\n[grid]\nn_normal = 65\nn_time = 33\n')
        digests = []
        for k, threads in enumerate((1, 1, 4)):
            out = tmp / f"out{k}"
            code = main(["solve", "--config", str(cfg), "--out", str(out),
                         "--threads", str(threads), "--seed", "11"])
            if code != 0:
                return Criterion(11, "Determinism", False, {"exit_code": code}, {"exit_code": "== 0"})
            digests.append(_digest(out))
    same = all(d == digests[0] for d in digests)
    return Criterion(11, "Determinism", same, {"identical": int(same), "files": len(digests[0])},
                     {"identical": "== 1"}, "small-ns solve, threads 1, 1, 4")


CRITERIA: dict[int, Callable[[], Criterion]] = {
    1: criterion_rayleigh,
    2: criterion_stokes_oracle,
    3: criterion_ns_oracle,
    4: criterion_contraction,
    5: criterion_duhamel,
    6: criterion_semigroup,
    7: criterion_operators,
    8: criterion_poisson,
    9: criterion_structure,
    10: criterion_weak,
    11: criterion_determinism,
}


def run_criterion(number: int) -> Criterion:
    return CRITERIA[number]()


def run_all(numbers=None) -> list[Criterion]:
    return [run_criterion(n) for n in (numbers or sorted(CRITERIA))]
