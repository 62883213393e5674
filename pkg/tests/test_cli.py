import csv
from pathlib import Path

import numpy as np
import pytest

import hstokes.oracle
from hstokes.cases import build_case
from hstokes.cli import REFERENCE_CONFIG, build_parser, load_config, main
from hstokes.domain import save_field

ROOT = Path(__file__).resolve().parents[1]


def rows(out):
    with open(out / "summary.csv") as fh:
        return list(csv.DictReader(fh))


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_demo_default(tmp_path):
    assert main(["demo", "--out", str(tmp_path / "o")]) == 0
    r = rows(tmp_path / "o")
    names = {x["invariant"] for x in r}
    assert {"divergence_relative", "boundary_error_assigned_row", "initial_error_relative"} <= names
    assert all(x["threshold"] for x in r) and all(x["passed"] == "true" for x in r)
    assert (tmp_path / "o" / "u.bin").exists() and (tmp_path / "o" / "u.json").exists()


def test_nonzero_flux_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, '[run]\ncase = "tangential-mode"\n[grid]\nn_normal = 33\nn_time = 9\n[data]\ngn_offset = 0.3\n')
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "zero tangential mean of g_n" in capsys.readouterr().err


def test_oracle_compare_rayleigh(tmp_path):
    assert main(["oracle-compare", "--out", str(tmp_path / "o")]) == 0
    (row,) = rows(tmp_path / "o")
    assert row["invariant"] == "oracle_rel_linf_rayleigh_1d" and float(row["value"]) <= 0.02


def test_oracle_disagreement_exits_4(tmp_path, monkeypatch):
    def broken(h, g, F, grid, cfg=None):
        ref = build_case("normal-mode", grid=dict(n_normal=33, n_time=9))
        from hstokes.stokes import solve_stokes
        return solve_stokes(ref.data(), diagnostics=False).u.scaled(3.0)

    monkeypatch.setattr(hstokes.oracle, "stokes_fd", broken)
    cfg = write(tmp_path, '[run]\ncase = "normal-mode"\n[grid]\nn_normal = 33\nn_time = 9\n')
    assert main(["oracle-compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


def test_noncontraction_exits_3(tmp_path):
    cfg = write(tmp_path, '[run]\ncase = "large-ns"\n[grid]\nn_normal = 65\nn_time = 33\n[iteration]\nnorm_random_pairs = 10000\n')
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert (tmp_path / "o" / "trace.csv").read_text().startswith("m,u_norm,increment,ratio")
    cfg2 = write(tmp_path, cfg.read_text() + "auto_timestep = true\n", "auto.toml")
    assert main(["solve", "--config", str(cfg2), "--out", str(tmp_path / "a")]) == 0
    r = {x["invariant"]: x for x in rows(tmp_path / "a")}
    assert float(r["accepted_horizon"]["value"]) < 1.0 and r["converged"]["passed"] == "true"


@pytest.mark.parametrize("text", [
    '[run]\ncase = "nope"\n',
    '[run]\nkind = "bogus"\n',
    '[grid]\nwidth = 3\n',
    '[data]\ng = "missing-file"\n',
    '[iteration]\nunknown = 1\n',
    '[run\n',
])
def test_invalid_configs_exit_2(tmp_path, text):
    cfg = write(tmp_path, text)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_and_unwritable_out(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.toml")]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["demo", "--out", str(blocker / "sub")]) == 2


def test_file_inputs_and_norms(tmp_path):
    case = build_case("normal-mode", grid=dict(n_normal=33, n_time=9))
    save_field(case.data().g, tmp_path / "g")
    cfg = write(tmp_path, '[data]\ng = "g.bin"\n[norms]\nmode = "sampled"\nrandom_pairs = 1000\n')
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    ncfg = write(tmp_path, '[norms]\nfield = "s/u"\nmode = "exact"\n', "n.toml")
    small = build_case("normal-mode", grid=dict(n_tangential=8, n_normal=9, n_time=5))
    from hstokes.stokes import solve_stokes
    save_field(solve_stokes(small.data(), diagnostics=False).u, tmp_path / "s" / "u")
    assert main(["norms", "--config", str(ncfg), "--out", str(tmp_path / "n")]) == 0
    r = {x["invariant"]: float(x["value"]) for x in rows(tmp_path / "n")}
    assert r["space_seminorm_alpha"] > 0 and r["linf"] > 0


def test_repeat_runs_byte_identical(tmp_path):
    cfg = write(tmp_path, '[run]\ncase = "tangential-mode"\n[grid]\nn_normal = 33\nn_time = 9\n')
    outs = []
    for k, th in enumerate(("1", "2")):
        out = tmp_path / f"o{k}"
        assert main(["solve", "--config", str(cfg), "--out", str(out), "--threads", th]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]


def test_verify_subset(tmp_path, capsys):
    cfg = write(tmp_path, "[verify]\ncriteria = [7, 8]\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 0
    assert capsys.readouterr().out.count("[PASS]") == 2
    assert all(x["invariant"].startswith("criterion_") for x in rows(tmp_path / "v"))


def test_reference_config_committed_and_parses(tmp_path):
    assert (ROOT / "configs" / "reference.toml").read_text() == REFERENCE_CONFIG
    cfg = load_config(ROOT / "configs" / "reference.toml")
    assert cfg.kind == "stokes" and cfg.case == "tangential-mode" and cfg.threads is None
    assert "n_normal" in build_parser().format_help() or "n_normal" in build_parser().epilog


def test_cli_overrides_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HSTOKES_THREADS", "2")
    cfg = load_config(None, "demo-rayleigh", out=str(tmp_path), threads=None, seed=5)
    assert cfg.case == "rayleigh-ramp" and cfg.seed == 5 and cfg.iteration.seed == 5 and cfg.threads is None
    ns = load_config(write(tmp_path, '[run]\ncase = "small-ns"\n'))
    assert ns.kind == "navier-stokes"
