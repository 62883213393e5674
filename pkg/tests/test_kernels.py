import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from hstokes.domain import BoundaryField, make_grid, sample_boundary
from hstokes.kernels import (
    composite_integral,
    duhamel_force,
    heat_evolve,
    heat_kernel_1d,
    kernel_table,
    solonnikov_kernel_hat,
    solonnikov_w,
)
from hstokes.oracle import rayleigh_1d
from hstokes.analysis import ramp
from hstokes.spectral import Torus, divergence

T2 = Torus((2 * np.pi, 2 * np.pi), (64, 64), (1, 0))

# Reference values of int_0^x d_z k(z, tau) exp(-a (x - z)) dz from 30-digit mpmath quadrature.
COMPOSITE_REFERENCE = [
    ((1.0, 0.5, 0.1), -0.34609777440380846),
    ((3.0, 1.0, 0.5), -0.065619025409462677),
    ((0.5, 2.0, 0.01), -1.1351663165854214),
    ((10.0, 0.05, 0.002), -1.4280454426667688),
]


def periodic_gaussian(s, torus=T2, images=3):
    n, L = torus.shape[0], torus.lengths[0]
    x = np.arange(n) * L / n
    g = 0.0
    for m in range(-images, images + 1):
        g = g + np.exp(-((x - np.pi + m * L) ** 2) / (4 * s)) / np.sqrt(4 * np.pi * s)
    return np.outer(g, g)


def test_heat_evolve_trivial():
    assert not np.any(heat_evolve(np.zeros(T2.shape), 0.3, T2))
    out = heat_evolve(np.full(T2.shape, 2.5), np.array([0.0, 0.1, 1.0]), T2)
    assert np.allclose(out, 2.5, rtol=0, atol=1e-14)
    with pytest.raises(ValueError):
        heat_evolve(np.zeros(T2.shape), -1.0, T2)


@pytest.mark.parametrize("s,t", [(0.05, 0.1), (0.2, 0.3)])
def test_heat_evolve_gaussian_modes(s, t):
    out = np.fft.fft2(heat_evolve(periodic_gaussian(s), t, T2))
    ref = np.fft.fft2(periodic_gaussian(s + t))
    keep = np.abs(ref) > 1e-6 * np.abs(ref).max()
    rel = np.abs(out[keep] - ref[keep]) / np.abs(ref[keep])
    assert rel.max() <= 1e-10


def test_duhamel_single_mode_closed_form():
    n_time, dt = 9, 0.05
    x = np.meshgrid(*(np.arange(64) * 2 * np.pi / 64,) * 2, indexing="ij")
    x1, x2 = x[1], x[0]
    xi = np.array([2.0, 1.0])
    c = np.array([[0.3, -1.0], [0.7, 0.2]])
    phase = xi[0] * x1 + xi[1] * x2
    F = np.broadcast_to(c[:, :, None, None] * np.cos(phase), (n_time, 2, 2, 64, 64))
    V = duhamel_force(F, dt, T2)
    f = -(xi @ c)
    pf = f - xi * (xi @ f) / (xi @ xi)
    for m in range(n_time):
        t = m * dt
        amp = (1 - np.exp(-(xi @ xi) * t)) / (xi @ xi)
        ref = amp * pf[:, None, None] * np.sin(phase)
        assert np.abs(V[m] - ref).max() <= 1e-13
    assert not np.any(V[0])


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1))
def test_duhamel_divergence_free(seed):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(4, 2, 2, 64, 64))
    V = duhamel_force(F, 0.01, T2)
    div = np.abs(divergence(V, T2)).max()
    assert div <= 1e-12 * max(1.0, np.abs(V).max() * 32)
    assert not np.any(V[0])
    assert not np.any(duhamel_force(np.zeros_like(F), 0.01, T2))


@pytest.mark.parametrize("args,ref", COMPOSITE_REFERENCE)
@pytest.mark.parametrize("method", ["closed", "gauss", "adaptive"])
def test_composite_integral_reference(args, ref, method):
    val = float(composite_integral(*args, method=method, nodes=256))
    assert val == pytest.approx(ref, rel=1e-10)


def test_kernel_hat_zero_mode_and_wall():
    x, tau = 0.7, 0.2
    k = solonnikov_kernel_hat([0.0], x, tau)
    dxk = -x / (2 * tau) * heat_kernel_1d(x, tau)
    assert k[0, 0] == pytest.approx(-2 * dxk, rel=1e-14)
    assert k[1, 0] == 0
    k3 = solonnikov_kernel_hat([0.0, 0.0], x, tau)
    assert np.allclose(k3[:2], -2 * dxk * np.eye(2)) and not np.any(k3[2])
    assert not np.any(solonnikov_kernel_hat([2.0, 1.0], 0.0, tau))
    with pytest.raises(ValueError):
        solonnikov_kernel_hat([1.0], 0.5, 0.0)


def test_kernel_hat_stable_under_node_doubling():
    for xi, x, tau in [([1.0], 0.3, 0.05), ([3.0, 4.0], 1.0, 0.4), ([0.5], 2.0, 0.01)]:
        a = solonnikov_kernel_hat(xi, x, tau, "gauss")
        b = solonnikov_kernel_hat(xi, x, tau, "closed")
        assert np.abs(a - b).max() <= 1e-8 * max(1.0, np.abs(b).max())


@settings(max_examples=30)
@given(st.floats(0.0, 20.0), st.floats(0.05, 3.0), st.floats(1e-3, 1.0))
def test_kernel_divergence_identity(a, x, tau):
    # i xi . w' + d_x w_n = 0 per mode reduces to Kd + a Kc + d_x Kc = 0
    xi = [a]
    h = 1e-5 * max(x, np.sqrt(tau))
    kp = solonnikov_kernel_hat(xi, x + h, tau)[1, 0]
    km = solonnikov_kernel_hat(xi, x - h, tau)[1, 0]
    k0 = solonnikov_kernel_hat(xi, x, tau)
    div = 1j * a * k0[0, 0] + (kp - km) / (2 * h)
    scale = max(np.abs(k0).max(), 1.0 / np.sqrt(tau)) * max(1.0, a)
    assert abs(div) <= 1e-6 * scale


def grid_rayleigh():
    return make_grid(2, 2 * np.pi, 8.0, 4, 129, 0.5, 65)


def test_w_zero_and_validation():
    grid = make_grid(2, 2 * np.pi, 6.0, 8, 17, 0.2, 9)
    assert not np.any(solonnikov_w(BoundaryField.zeros(grid)).values)
    bad = np.zeros((9, 2, 8))
    bad[3, 1] = 1.0
    with pytest.raises(ValueError):
        solonnikov_w(BoundaryField(grid, bad))
    bad = np.zeros((9, 1, 8))
    bad[0, 0] = 1.0
    with pytest.raises(ValueError):
        solonnikov_w(BoundaryField(grid, bad))


@settings(max_examples=8)
@given(st.integers(0, 2**31 - 1), st.floats(-8.0, 8.0).filter(lambda v: abs(v) > 1e-3))
def test_w_linear(seed, lam):
    grid = make_grid(3, 2 * np.pi, 6.0, 4, 9, 0.2, 5)
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(5, 2, 4, 4))
    vals[0] = 0.0
    G = BoundaryField(grid, vals)
    w1 = solonnikov_w(G).values
    w2 = solonnikov_w(BoundaryField(grid, lam * vals)).values
    assert np.allclose(w2, lam * w1, rtol=1e-13, atol=1e-13 * np.abs(w2).max())
    other = rng.normal(size=vals.shape)
    other[0] = 0.0
    w3 = solonnikov_w(BoundaryField(grid, vals + other)).values
    assert np.allclose(w3, w1 + solonnikov_w(BoundaryField(grid, other)).values, atol=1e-12)


def test_w_exact_for_linear_wall_data():
    grid = grid_rayleigh()
    G = sample_boundary(grid, lambda x, t: [t + 0 * x[0], 0 * x[0]])
    w = solonnikov_w(G).values[:, 0, :, 0]
    t = grid.times[1:, None]
    x = grid.xn[None, :]
    exact = t * (1 + x**2 / (2 * t)) * special.erfc(x / (2 * np.sqrt(t))) - x * np.sqrt(t / np.pi) * np.exp(-x**2 / (4 * t))
    assert np.abs(w[1:] - exact).max() <= 1e-10


def test_w_rayleigh_zero_mode():
    grid = grid_rayleigh()
    G = sample_boundary(grid, lambda x, t: [ramp(t) + 0 * x[0], 0 * x[0]])
    w = solonnikov_w(G).values
    ref = rayleigh_1d(lambda t: float(ramp(t)), grid.xn, grid.t_final, grid.n_time, substeps=4)
    err = np.abs(w[:, 0, :, 0] - ref).max() / np.abs(ref).max()
    assert err <= 0.02
    assert np.abs(w[:, 1]).max() <= 1e-14


def test_w_trace_limit_decreases():
    errs = []
    for nn in (33, 65, 129):
        grid = make_grid(2, 2 * np.pi, 8.0, 8, nn, 0.5, 33)
        G = sample_boundary(grid, lambda x, t: [ramp(t) * np.sin(x[0]), 0 * x[0]])
        w = solonnikov_w(G).values
        errs.append(np.abs(w[:, 0, 1] - G.values[:, 0]).max())
    assert errs[0] > errs[1] > errs[2]


def test_kernel_table_cached():
    grid = make_grid(2, 2 * np.pi, 6.0, 8, 17, 0.2, 9)
    t1, t2 = kernel_table(grid), kernel_table(grid)
    assert t1 is t2
    assert t1.n_lags == 8 and np.isfinite(t1.decay_constant())
