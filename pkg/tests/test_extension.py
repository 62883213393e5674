import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hstokes.analysis import periodic_seminorm
from hstokes.domain import BoundaryField, SpaceTimeField, make_grid, sample, sample_boundary
from hstokes.extension import (
    CompatibilityError,
    check_compatibility,
    extend_initial,
    extend_tensor,
    reflect,
    restrict,
)
from hstokes.spectral import Torus, divergence


def grid3():
    return make_grid(3, 2 * np.pi, 6.0, 16, 33, 0.5, 5)


def test_compatibility_zero_passes():
    grid = grid3()
    rep = check_compatibility(None, BoundaryField.zeros(grid))
    assert rep.passed and rep.violations() == []
    assert rep.trace_mismatch == rep.divergence_sup == rep.normal_trace_sup == rep.gn_mean_sup == 0


def test_compatibility_x1_independent_field():
    grid = grid3()
    h = sample(grid, lambda x, t: [np.sin(x[1]) * np.exp(-x[2]), 0 * x[0], 0 * x[0]]).values[0]
    g = sample_boundary(grid, lambda x, t: [np.sin(x[1]), 0 * x[0], 0 * x[0]])
    rep = check_compatibility(h, g)
    assert rep.trace_mismatch == 0 and rep.divergence_sup == 0 and rep.passed


def test_compatibility_divergence_injected():
    grid = make_grid(2, 2 * np.pi, 4.0, 32, 17, 0.5, 3)
    h = sample(grid, lambda x, t: [np.sin(x[0]) + 0 * x[1], 0 * x[0]]).values[0]
    g = sample_boundary(grid, lambda x, t: [np.sin(x[0]), 0 * x[0]])
    rep = check_compatibility(h, g)
    assert rep.divergence_sup == pytest.approx(1.0, rel=1e-12)
    assert not rep.passed and rep.violations() == ["div h = 0"]


def test_compatibility_flux_and_normal_trace_rules():
    grid = make_grid(2, 2 * np.pi, 4.0, 16, 17, 0.5, 3)
    g = sample_boundary(grid, lambda x, t: [0 * x[0], t + 0 * x[0]])
    rep = check_compatibility(None, g)
    assert rep.violations() == ["zero tangential mean of g_n at every t"]
    h = sample(grid, lambda x, t: [0 * x[0], 0.1 * np.sin(x[0]) + 0 * x[1]]).values[0]
    g0 = sample_boundary(grid, lambda x, t: [0 * x[0], 0.1 * np.sin(x[0])])
    assert "h_n(., x_n = 0) = 0 (needed for the reflection extension)" in check_compatibility(h, g0).violations()


def test_extend_initial_examples():
    grid = grid3()
    assert not np.any(extend_initial(np.zeros((3, *grid.space_shape)), grid))
    h = sample(grid, lambda x, t: [np.sin(x[1]) * np.exp(-x[2]), 0 * x[0], 0 * x[0]]).values[0]
    ht = extend_initial(h, grid)
    n = grid.n_full
    assert np.array_equal(ht[0, 1:], ht[0, :0:-1])
    assert np.abs(divergence(ht, Torus.full(grid))).max() <= 1e-10
    bad = sample(grid, lambda x, t: [0 * x[0], 0 * x[0], 0.1 * np.sin(x[0]) + 0 * x[2]]).values[0]
    with pytest.raises(CompatibilityError):
        extend_initial(bad, grid)
    assert ht.shape == (3, n, 16, 16)


@settings(max_examples=20)
@given(st.integers(0, 2**31 - 1))
def test_extend_initial_restriction_bit_exact(seed):
    grid = make_grid(2, 1.0, 2.0, 8, 9, 1.0, 2)
    h = np.random.default_rng(seed).normal(size=(2, *grid.space_shape))
    h[1, 0] = 0.0
    ht = extend_initial(h, grid)
    assert np.array_equal(restrict(ht, grid), h)
    m = grid.n_normal - 1
    assert np.array_equal(ht[1, m + 1:], -ht[1, m - 1:0:-1])


def test_extend_tensor_examples():
    grid = make_grid(2, 2 * np.pi, 4.0, 8, 9, 0.5, 3)
    assert not np.any(extend_tensor(SpaceTimeField.zeros(grid, "tensor")))
    F = sample(grid, lambda x, t: [[x[1], x[1]], [x[1], x[1]]], "F")
    Ft = extend_tensor(F)
    z = np.concatenate([grid.xn, -grid.xn[-2:0:-1]])
    assert np.allclose(Ft[1, 0, 1, :, 0], np.abs(z))


def brute_seminorm(f, grid, alpha):
    """All-pairs seminorm on the half grid: Euclidean in x_n, minimum image tangentially."""
    xn, xt = np.meshgrid(grid.xn, grid.xt, indexing="ij")
    pts = np.stack([xn.ravel(), xt.ravel()], 1)
    v = f.reshape(-1)
    dn = pts[:, None, 0] - pts[None, :, 0]
    dt = np.abs(pts[:, None, 1] - pts[None, :, 1])
    dt = np.minimum(dt, grid.period_l - dt)
    d = np.sqrt(dn**2 + dt**2)
    off = d > 0
    return float((np.abs(v[:, None] - v[None, :])[off] / d[off] ** alpha).max())


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1))
def test_extend_tensor_isometry_and_seminorm(seed):
    grid = make_grid(2, 3.0, 2.0, 8, 9, 1.0, 2)
    F = np.random.default_rng(seed).normal(size=(2, 2, 2, *grid.space_shape))
    Ft = extend_tensor(F, grid)
    assert np.abs(Ft).max() == np.abs(F).max()
    half = brute_seminorm(F[0, 0, 1], grid, 0.5)
    full = periodic_seminorm(Ft[0, 0, 1], (2 * grid.height_h, grid.period_l), 0.5)
    assert full <= half * (1 + 1e-12)


def test_reflect_parity():
    a = np.arange(5.0)
    assert list(reflect(a, 0, 1)) == [0, 1, 2, 3, 4, 3, 2, 1]
    assert list(reflect(a, 0, -1)) == [0, 1, 2, 3, 4, -3, -2, -1]
