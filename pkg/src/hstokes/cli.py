"""Command-line entry point: ``hstokes {solve,verify,norms,oracle-compare,demo}``.

Exit codes: 0 success, 1 a verification criterion failed, 2 invalid input
(config, files, compatibility), 3 non-contraction or horizon underflow,
4 oracle disagreement beyond tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import analysis
from .cases import CASE_NAMES, Case, build_case, load_data
from .domain import GridSpec, SpaceTimeField, load_field, save_field
from .extension import CompatibilityError
from .navier_stokes import HorizonUnderflow, IterationConfig, NonContraction, auto_timestep, picard_solve
from .spectral import set_threads
from .stokes import StokesData, solve_stokes

__all__ = ["RunConfig", "REFERENCE_CONFIG", "load_config", "run", "main"]

EXIT_OK, EXIT_CRITERION, EXIT_INVALID, EXIT_CONTRACTION, EXIT_ORACLE = 0, 1, 2, 3, 4

KINDS = ("stokes", "navier-stokes", "demo-rayleigh", "verify", "norms", "oracle-compare")
_COMMAND_KIND = {"demo": "demo-rayleigh", "verify": "verify", "norms": "norms",
                 "oracle-compare": "oracle-compare"}
_GRID_KEYS = ("dim", "L", "H", "n_tangential", "n_normal", "T", "n_time")

REFERENCE_CONFIG = """\
# Reference run configuration; every key is optional and shows its default.

[run]
# stokes | navier-stokes | demo-rayleigh | verify | norms | oracle-compare.
# Empty means: taken from the subcommand, or from the case for `solve`.
kind = ""
# zero | rayleigh-ramp | tangential-mode | normal-mode | small-ns | large-ns
case = "tangential-mode"
alpha = 0.5
seed = 0
# Overridden by --out / --threads; threads falls back to HSTOKES_THREADS, then 1.
out = "hstokes-out"
threads = 0

[grid]
# Entries override the case's default grid: dim, L, H, n_tangential,
# n_normal, T, n_time.

[data]
amplitude = 0.0        # 0 selects the case default
gn_offset = 0.0        # adds offset * ramp(t) to g_n (breaks the zero-flux rule)
h_amplitude = 0.0      # adds the built-in vortex initial velocity
ramp_tau = 0.1
# File inputs (binary + JSON field format) replace the case; the grid is read from g.
g = ""
h = ""
F = ""

[iteration]
m_max = 30
contraction_threshold = 0.9
stop_tol = 1e-6
t_shrink = 0.5
max_retries = 6
norm_random_pairs = 100000
auto_timestep = false

[norms]
field = ""             # stored field; empty means: solve the configured case first
mode = "sampled"       # sampled | exact
random_pairs = 1000000

[verify]
criteria = []          # empty means all of 1..11
"""


@dataclass
class RunConfig:
    kind: str = ""
    case: str = "tangential-mode"
    alpha: float = 0.5
    seed: int = 0
    out: Path = Path("hstokes-out")
    threads: int | None = None
    grid: dict = field(default_factory=dict)
    amplitude: float | None = None
    gn_offset: float = 0.0
    h_amplitude: float = 0.0
    ramp_tau: float = 0.1
    g_path: Path | None = None
    h_path: Path | None = None
    F_path: Path | None = None
    iteration: IterationConfig = field(default_factory=IterationConfig)
    auto_timestep: bool = False
    norms_field: Path | None = None
    norms_mode: str = "sampled"
    norms_random_pairs: int = 1_000_000
    criteria: tuple[int, ...] = ()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; known: {', '.join(KINDS)}")
        if self.g_path is None and self.case not in CASE_NAMES:
            raise ValueError(f"unknown case {self.case!r}; known: {', '.join(CASE_NAMES)}")
        for p in (self.g_path, self.h_path, self.F_path, self.norms_field):
            if p is not None and not p.with_suffix(".json").exists():
                raise ValueError(f"referenced file {p} does not exist")
        if (self.h_path or self.F_path) and self.g_path is None:
            raise ValueError("file inputs for h or F need g as a file too")
        unknown = set(self.grid) - set(_GRID_KEYS)
        if unknown:
            raise ValueError(f"unknown grid keys {sorted(unknown)}; known: {', '.join(_GRID_KEYS)}")
        if self.norms_mode not in ("sampled", "exact"):
            raise ValueError("norms mode must be 'sampled' or 'exact'")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def describe(self) -> dict:
        """Resolved settings written next to the outputs (no paths of the run itself, no threads)."""
        d = {
            "kind": self.kind, "case": self.case, "alpha": self.alpha, "seed": self.seed,
            "grid": dict(sorted(self.grid.items())), "amplitude": self.amplitude,
            "gn_offset": self.gn_offset, "h_amplitude": self.h_amplitude, "ramp_tau": self.ramp_tau,
            "files": {k: None if p is None else p.name
                      for k, p in (("g", self.g_path), ("h", self.h_path), ("F", self.F_path))},
            "iteration": asdict(self.iteration), "auto_timestep": self.auto_timestep,
        }
        return d


def _path(value, base: Path) -> Path | None:
    if not value:
        return None
    p = Path(value)
    p = p if p.is_absolute() else base / p
    return p.with_suffix("") if p.suffix in (".bin", ".json") else p


def load_config(path: Path | None, kind: str = "", out: str | None = None,
                threads: int | None = None, seed: int | None = None) -> RunConfig:
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ValueError(f"config file {path} does not exist")
        raw = tomllib.loads(path.read_text())
        base = path.parent
    run_s, data_s = raw.get("run", {}), raw.get("data", {})
    it_s, norms_s = dict(raw.get("iteration", {})), raw.get("norms", {})
    cfg = RunConfig()
    cfg.case = run_s.get("case", cfg.case)
    cfg.kind = kind or run_s.get("kind", "")
    cfg.alpha = float(run_s.get("alpha", cfg.alpha))
    cfg.seed = int(seed if seed is not None else run_s.get("seed", 0))
    cfg.out = Path(out) if out else Path(run_s.get("out", str(cfg.out)))
    t = threads if threads is not None else (run_s.get("threads") or None)
    cfg.threads = None if t is None else int(t)
    cfg.grid = dict(raw.get("grid", {}))
    amp = data_s.get("amplitude", 0.0)
    cfg.amplitude = float(amp) if amp else None
    cfg.gn_offset = float(data_s.get("gn_offset", 0.0))
    cfg.h_amplitude = float(data_s.get("h_amplitude", 0.0))
    cfg.ramp_tau = float(data_s.get("ramp_tau", 0.1))
    cfg.g_path = _path(data_s.get("g"), base)
    cfg.h_path = _path(data_s.get("h"), base)
    cfg.F_path = _path(data_s.get("F"), base)
    cfg.auto_timestep = bool(it_s.pop("auto_timestep", False))
    known = {f.name for f in fields(IterationConfig)} - {"alpha", "seed"}
    bad = set(it_s) - known
    if bad:
        raise ValueError(f"unknown iteration keys {sorted(bad)}")
    cfg.iteration = IterationConfig(alpha=cfg.alpha, seed=cfg.seed, **it_s)
    cfg.norms_field = _path(norms_s.get("field"), base)
    cfg.norms_mode = norms_s.get("mode", "sampled")
    cfg.norms_random_pairs = int(norms_s.get("random_pairs", 1_000_000))
    cfg.criteria = tuple(int(c) for c in raw.get("verify", {}).get("criteria", []))
    if cfg.kind == "demo-rayleigh":
        cfg.case = run_s.get("case", "rayleigh-ramp")
    elif cfg.kind == "oracle-compare" and "case" not in run_s:
        cfg.case = "rayleigh-ramp"
    if not cfg.kind:
        if cfg.g_path is None and cfg.case in CASE_NAMES:
            cfg.kind = build_case(cfg.case, grid=dict(n_normal=3, n_time=2, n_tangential=2)).kind
        else:
            cfg.kind = "stokes"
    cfg.validate()
    return cfg


# -- outputs -------------------------------------------------------------------


@dataclass
class Row:
    invariant: str
    value: float
    threshold: str
    passed: bool


def _check(name: str, value: float, limit: float | None, op: str = "<=") -> Row:
    value = float(value)
    if limit is None:
        return Row(name, value, "logged (finite)", math.isfinite(value))
    ok = value <= limit if op == "<=" else value >= limit
    return Row(name, value, f"{op} {limit:g}", bool(ok))


def write_summary(rows: list[Row], out: Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["invariant", "value", "threshold", "passed"])
    for r in rows:
        w.writerow([r.invariant, repr(r.value), r.threshold, str(r.passed).lower()])
    (out / "summary.csv").write_text(buf.getvalue())


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- pipelines -------------------------------------------------------------------


def _case(cfg: RunConfig) -> Case:
    return build_case(cfg.case, grid=cfg.grid, amplitude=cfg.amplitude, gn_offset=cfg.gn_offset,
                      h_amplitude=cfg.h_amplitude, alpha=cfg.alpha, ramp_tau=cfg.ramp_tau)


def _data(cfg: RunConfig) -> StokesData:
    if cfg.g_path is not None:
        grid = load_field(cfg.g_path).grid
        return load_data(grid, cfg.g_path, cfg.h_path, cfg.F_path, cfg.alpha)
    return _case(cfg).data()


def _norm_rows(u: SpaceTimeField, cfg: RunConfig, prefix: str = "u") -> list[Row]:
    rep = analysis.anisotropic_seminorm(u, cfg.alpha, "sampled", cfg.iteration.norm_random_pairs, cfg.seed)
    return [_check(f"{prefix}_linf", rep.linf, None),
            _check(f"{prefix}_space_seminorm_alpha", rep.space_seminorm, None),
            _check(f"{prefix}_time_seminorm_alpha_half", rep.time_seminorm, None)]


def _stokes_rows(diag: dict, tol: float) -> list[Row]:
    rows = [_check(k, v, tol) for k, v in diag.items() if k.startswith("compatibility_")]
    rows += [
        _check("initial_error_relative", diag["initial_error"], 1e-8),
        _check("boundary_error_assigned_row", diag["boundary_error"], 1e-12),
        _check("boundary_error_first_interior_row", diag["boundary_error_interior"], None),
        _check("divergence_relative", diag["divergence_relative"], 1e-3),
        _check("weak_residual", diag["weak_residual"], 1e-3),
    ]
    return rows


def run_stokes(cfg: RunConfig, out: Path) -> int:
    data = _data(cfg)
    sol = solve_stokes(data)
    save_field(sol.u, out / "u")
    for name, part in sol.parts.items():
        save_field(part, out / name)
    save_field(sol.G, out / "G")
    rows = _stokes_rows(sol.diagnostics, 1e-6) + _norm_rows(sol.u, cfg)
    write_summary(rows, out)
    return EXIT_OK


def _write_trace(trace, out: Path) -> None:
    (out / "trace.csv").write_text(trace.to_csv())
    (out / "trace.json").write_text(trace.to_json() + "\n")


def run_navier_stokes(cfg: RunConfig, out: Path) -> int:
    data = _data(cfg)
    rows: list[Row] = []
    try:
        if cfg.auto_timestep:
            T_star, u, trace, attempts = auto_timestep(data, data.grid, cfg.iteration)
            _write_json([{"horizon": h, "outcome": o} for h, o in attempts], out / "attempts.json")
        else:
            u, trace = picard_solve(data, data.grid, cfg.iteration)
            T_star = data.grid.t_final
    except NonContraction as exc:
        _write_trace(exc.trace, out)
        print(f"hstokes: {exc}", file=sys.stderr)
        return EXIT_CONTRACTION
    except HorizonUnderflow as exc:
        _write_json([{"horizon": h, "outcome": o} for h, o in exc.attempts], out / "attempts.json")
        print(f"hstokes: {exc}", file=sys.stderr)
        return EXIT_CONTRACTION
    _write_trace(trace, out)
    save_field(u, out / "u")
    ratios = [r for r in trace.ratios if r is not None]
    rows.append(_check("accepted_horizon", T_star, None))
    rows.append(_check("data_norm_M0", trace.data_norm, None))
    rows.append(_check("iterate_bound_M", trace.bound, None))
    rows.append(_check("iterations", trace.iterations, cfg.iteration.m_max))
    rows.append(Row("converged", float(trace.converged), "== 1", trace.converged))
    rows.append(_check("max_contraction_ratio", max(ratios, default=0.0), cfg.iteration.contraction_threshold))
    rows.append(_check("divergence_relative", analysis.divergence_sup(u, relative=True), 1e-3))
    rows.append(_check("weak_residual_ns", analysis.weak_residual_ns(u, F=data.F), 1e-3))
    rows += _norm_rows(u, cfg)
    write_summary(rows, out)
    return EXIT_OK


def run_norms(cfg: RunConfig, out: Path) -> int:
    if cfg.norms_field is not None:
        u = load_field(cfg.norms_field)
        if not isinstance(u, SpaceTimeField):
            raise ValueError("norms needs a space-time field")
    else:
        u = solve_stokes(_data(cfg), diagnostics=False).u
    rep = analysis.anisotropic_seminorm(u, cfg.alpha, cfg.norms_mode, cfg.norms_random_pairs, cfg.seed)
    rows = [_check("linf", rep.linf, None),
            _check("space_seminorm_alpha", rep.space_seminorm, None),
            _check("time_seminorm_alpha_half", rep.time_seminorm, None),
            _check("hoelder_total", rep.total, None)]
    if rep.space_upper is not None:
        rows.append(_check("space_seminorm_upper", rep.space_upper, None))
        rows.append(_check("time_seminorm_upper", rep.time_upper, None))
        rows.append(_check("space_sampled_below_upper", rep.space_seminorm - rep.space_upper, 0.0))
    write_summary(rows, out)
    _write_json({"mode": rep.mode, "alpha": rep.alpha, "pair_budget": rep.pair_budget}, out / "norms.json")
    return EXIT_OK


def run_oracle_compare(cfg: RunConfig, out: Path) -> int:
    from .oracle import ns_fd, rayleigh_1d, stokes_fd

    if cfg.g_path is not None:
        raise ValueError("oracle-compare needs a built-in case (the oracles sample closures)")
    case = _case(cfg)
    grid = case.grid
    rows: list[Row] = []
    if case.name == "rayleigh-ramp":
        sol = solve_stokes(case.data(), diagnostics=False)
        u = sol.u
        a = lambda t: float(np.ravel(case.g([np.zeros(1)] * (grid.dim - 1), t)[0])[0])  # noqa: E731
        xf = np.linspace(0.0, grid.height_h, 2 * (grid.n_normal - 1) + 1)
        ref_prof = rayleigh_1d(a, xf, grid.t_final, grid.n_time, substeps=2)[:, ::2]
        ref_vals = np.zeros_like(u.values)
        ref_vals[:, 0] = ref_prof.reshape(ref_prof.shape + (1,) * (grid.dim - 1))
        ref = SpaceTimeField(grid, ref_vals, "reference")
        err, limit = analysis.linf_relative(u.values, ref.values), 0.02
        rows.append(_check("oracle_rel_linf_rayleigh_1d", err, limit))
    elif case.kind == "navier-stokes":
        try:
            u, _ = picard_solve(case.data(), grid, cfg.iteration)
        except NonContraction as exc:
            print(f"hstokes: {exc}", file=sys.stderr)
            return EXIT_CONTRACTION
        ref = ns_fd(case.h, case.g, grid)
        err, limit = _half_error(u, ref), 0.05
        rows.append(_check("oracle_rel_linf_ns_fd_lower_half", err, limit))
    else:
        u = solve_stokes(case.data(), diagnostics=False).u
        ref = stokes_fd(case.h, case.g, case.F, grid)
        err, limit = _half_error(u, ref), 0.05
        rows.append(_check("oracle_rel_linf_stokes_fd_lower_half", err, limit))
    save_field(u, out / "u")
    save_field(ref, out / "reference")
    write_summary(rows, out)
    return EXIT_OK if err <= limit else EXIT_ORACLE


def _half_error(u: SpaceTimeField, ref: SpaceTimeField) -> float:
    rows = u.grid.xn <= 0.5 * u.grid.height_h
    if not np.any(ref.values[:, :, rows]):
        return float(np.abs(u.values[:, :, rows]).max())
    return analysis.linf_relative(u.values[:, :, rows], ref.values[:, :, rows])


def run_verify(cfg: RunConfig, out: Path) -> int:
    from .acceptance import CRITERIA, run_criterion

    numbers = cfg.criteria or tuple(sorted(CRITERIA))
    bad = [n for n in numbers if n not in CRITERIA]
    if bad:
        raise ValueError(f"unknown criteria {bad}")
    rows: list[Row] = []
    failed: list[int] = []
    for n in numbers:
        c = run_criterion(n)
        print(c.line())
        if not c.passed:
            failed.append(n)
        for key, val in c.values.items():
            rows.append(Row(f"criterion_{n}.{key}", float(val), c.thresholds.get(key, "logged"), c.passed))
    write_summary(rows, out)
    if any(n in (1, 2, 3) for n in failed):
        return EXIT_ORACLE
    return EXIT_CRITERION if failed else EXIT_OK


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; returns the process exit status."""
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ValueError(f"output directory {out} is not writable: {exc}") from exc
    set_threads(cfg.threads)
    _write_json(cfg.describe(), out / "config.json")
    if cfg.kind == "navier-stokes":
        return run_navier_stokes(cfg, out)
    if cfg.kind in ("stokes", "demo-rayleigh"):
        return run_stokes(cfg, out)
    if cfg.kind == "norms":
        return run_norms(cfg, out)
    if cfg.kind == "oracle-compare":
        return run_oracle_compare(cfg, out)
    return run_verify(cfg, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hstokes",
        description="Half-space Stokes and Navier-Stokes solver with verification tools.",
        epilog="Configuration reference (TOML, all defaults):\n\n" + REFERENCE_CONFIG
        + "\nExit codes: 0 ok, 1 criterion failed, 2 invalid input, 3 non-contraction, 4 oracle disagreement.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve the configured problem (Stokes or Navier-Stokes)",
        "verify": "run the acceptance criteria",
        "norms": "Hoelder norms of a stored field or of the configured solve",
        "oracle-compare": "compare against the finite-difference oracles",
        "demo": "solve the Rayleigh ramp case",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, default=None, help="TOML config file (default: built-in defaults)")
        p.add_argument("--out", default=None, help="output directory (default: [run].out = hstokes-out)")
        p.add_argument("--threads", type=int, default=None,
                       help="FFT worker cap (default: [run].threads, then HSTOKES_THREADS, then 1)")
        p.add_argument("--seed", type=int, default=None, help="seed for sampled norms (default: [run].seed = 0)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _COMMAND_KIND.get(args.command, ""), args.out, args.threads, args.seed)
        if args.command == "solve" and cfg.kind not in ("stokes", "navier-stokes"):
            raise ValueError(f"solve runs stokes or navier-stokes problems, config asks for {cfg.kind!r}")
        return run(cfg)
    except CompatibilityError as exc:
        print(f"hstokes: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"hstokes: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
