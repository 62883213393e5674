import json

import numpy as np
import pytest

from hstokes.analysis import anisotropic_seminorm
from hstokes.cases import build_case
from hstokes.domain import SpaceTimeField, make_grid
from hstokes.navier_stokes import (
    HorizonUnderflow,
    IterationConfig,
    IterationTrace,
    NonContraction,
    advective_flux,
    auto_timestep,
    picard_solve,
    picard_step,
    restrict_horizon,
)
from hstokes.stokes import solve_stokes

CFG = IterationConfig(norm_random_pairs=20000)


def coarse(name, amplitude=None, **grid):
    g = dict(n_normal=65, n_time=33)
    g.update(grid)
    return build_case(name, grid=g, amplitude=amplitude)


def test_picard_step_zero_is_stokes_bit_exact():
    data = coarse("small-ns").data()
    z = SpaceTimeField.zeros(data.grid)
    assert np.array_equal(picard_step(z, data).values, solve_stokes(data, diagnostics=False).u.values)
    zero = coarse("zero").data()
    assert not np.any(picard_step(z, zero).values)


def test_picard_step_recomposition_on_rayleigh():
    data = build_case("rayleigh-ramp", grid=dict(n_normal=65, n_time=33)).data()
    u = solve_stokes(data, diagnostics=False).u
    F = advective_flux(u)
    assert np.array_equal(F[:, 0, 0], -u.values[:, 0] ** 2)
    assert not np.any(F[:, 0, 1]) and not np.any(F[:, 1])
    manual = solve_stokes(data.with_force(SpaceTimeField(u.grid, F, "F")), diagnostics=False).u
    assert np.array_equal(picard_step(u, data).values, manual.values)


def test_picard_zero_data_converges_immediately():
    u, trace = picard_solve(coarse("zero").data(), cfg=CFG)
    assert trace.converged and trace.iterations == 1 and not np.any(u.values)


def test_small_data_contracts_geometrically():
    data = coarse("small-ns").data()
    u, trace = picard_solve(data, cfg=CFG)
    ratios = [r for r in trace.ratios if r is not None]
    assert trace.converged and ratios and max(ratios) <= 0.6
    assert all(b < a for a, b in zip(trace.increments[:-1], trace.increments[1:]))
    u1 = trace.u_norms[0]
    theta = CFG.contraction_threshold
    assert trace.bound <= u1 / (1 - theta) + u1


def test_large_data_raises_noncontraction():
    data = coarse("large-ns").data()
    with pytest.raises(NonContraction) as exc:
        picard_solve(data, cfg=CFG)
    ratios = [r for r in exc.value.trace.ratios if r is not None]
    assert sum(r > CFG.contraction_threshold for r in ratios[-2:]) == 2


def test_auto_timestep_paths():
    T, _, _, attempts = auto_timestep(coarse("small-ns").data(), cfg=CFG)
    assert T == 0.25 and attempts == [(0.25, "accepted")]
    T, u, trace, attempts = auto_timestep(coarse("large-ns", amplitude=5.0).data(), cfg=CFG)
    assert T == 0.5 and len(attempts) == 2 and attempts[0][1].startswith("non-contraction")
    assert u.grid.n_time == 17 and trace.horizon == 0.5
    with pytest.raises(HorizonUnderflow) as exc:
        auto_timestep(coarse("large-ns", amplitude=1000.0, n_time=17).data(), cfg=CFG)
    assert all(o.startswith("non-contraction") for _, o in exc.value.attempts)


def test_deterministic_traces():
    data = coarse("small-ns").data()
    a = picard_solve(data, cfg=CFG)
    b = picard_solve(data, cfg=CFG)
    assert a[1].to_csv() == b[1].to_csv() and np.array_equal(a[0].values, b[0].values)


def test_bilinear_seminorm_bound():
    grid = make_grid(2, 2 * np.pi, 3.0, 8, 9, 0.5, 5)
    rng = np.random.default_rng(1)
    for _ in range(5):
        u = SpaceTimeField(grid, rng.normal(size=(5, 2, 9, 8)))
        uu = SpaceTimeField(grid, -advective_flux(u))
        ru = anisotropic_seminorm(u, 0.5, "exact")
        ruu = anisotropic_seminorm(uu, 0.5, "exact")
        assert ruu.space_seminorm <= 2 * ru.linf * ru.space_seminorm + 1e-8
        assert ruu.time_seminorm <= 2 * ru.linf * ru.time_seminorm + 1e-8


def test_trace_serialization():
    tr = IterationTrace(1.0, 0.5, [2.0, 2.1, 2.1], [0.4, 0.1, 0.01], True)
    assert tr.ratios == [None, 0.25, pytest.approx(0.1)]
    lines = tr.to_csv().splitlines()
    assert lines[0] == "m,u_norm,increment,ratio" and lines[1].endswith(",")
    doc = json.loads(tr.to_json())
    assert doc["bound"] == 2.1 and len(doc["rows"]) == 3 and doc["converged"]
    assert tr.monotone()


def test_restrict_horizon_and_config_validation():
    data = coarse("small-ns").data()
    short = restrict_horizon(data, 9)
    assert short.grid.n_time == 9 and short.grid.dt == data.grid.dt
    assert np.array_equal(short.g.values, data.g.values[:9])
    for bad in (dict(contraction_threshold=1.0), dict(m_max=0), dict(t_shrink=1.0), dict(alpha=0.0)):
        with pytest.raises(ValueError):
            IterationConfig(**bad)
