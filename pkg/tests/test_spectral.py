import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hstokes import spectral
from hstokes.acceptance import band_limited
from hstokes.domain import make_grid
from hstokes.spectral import SpectralSlice, Torus

T2 = Torus((2 * np.pi, 2 * np.pi), (32, 32), (1, 0))
T3 = Torus((2 * np.pi, 2 * np.pi, 2 * np.pi), (16, 16, 16), (1, 2, 0))


def coords(torus):
    axes = [np.arange(n) * L / n for n, L in zip(torus.shape, torus.lengths)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [mesh[a] for a in torus.component_axes]


def test_riesz_single_mode_and_constant():
    x1, _ = coords(T2)
    assert np.allclose(spectral.riesz(0, np.sin(x1), T2), -np.cos(x1), atol=1e-13)
    assert np.allclose(spectral.riesz(1, np.full(T2.shape, 3.0), T2), 0.0)


def test_riesz_3d_two_modes():
    x1, x2, _ = coords(T3)
    out = spectral.riesz(0, np.cos(x1) + np.cos(x2), T3)
    assert np.allclose(out, np.sin(x1), atol=1e-13)


def test_riesz_tangential_matches_dense_dft():
    grid = make_grid(2, 2 * np.pi, 4.0, 16, 5, 1.0, 2)
    rng = np.random.default_rng(0)
    g = band_limited(Torus.tangential(grid), rng)
    n = 16
    F = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    k = np.fft.fftfreq(n, 1.0 / n)
    k_odd = np.where(np.abs(k) == n // 2, 0.0, k)
    m = np.divide(-1j * k_odd, np.abs(k), out=np.zeros(n, complex), where=k != 0)
    dense = (np.conj(F) / n) @ np.diag(m) @ F
    assert np.allclose(spectral.riesz_tangential(0, g, grid), (dense @ g).real, atol=1e-13)
    x = grid.xt
    assert np.allclose(spectral.riesz_tangential(0, np.sin(x), grid), -np.cos(x), atol=1e-13)
    assert np.allclose(spectral.riesz_tangential(0, np.ones(n), grid), 0.0)


def test_leray_examples():
    x1, x2 = coords(T2)
    grad = spectral.gradient(np.sin(x1) * np.sin(x2), T2)
    assert np.abs(spectral.leray_project(grad, T2)).max() <= 1e-12 * np.abs(grad).max()
    v = np.stack([np.sin(x2), 0 * x1])
    assert np.allclose(spectral.leray_project(v, T2), v, atol=1e-13)
    mean = np.stack([np.ones(T2.shape), 2 * np.ones(T2.shape)])
    assert np.allclose(spectral.leray_project(mean, T2), mean)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_operator_identities(seed):
    rng = np.random.default_rng(seed)
    f = band_limited(T3, rng)
    v = band_limited(T3, rng, (3,))
    rr = sum(spectral.riesz(j, spectral.riesz(j, f, T3), T3) for j in range(3))
    assert np.abs(rr + f - f.mean()).max() <= 1e-12 * np.abs(f).max()
    pv = spectral.leray_project(v, T3)
    assert np.abs(spectral.leray_project(pv, T3) - pv).max() <= 1e-12 * np.abs(v).max()
    assert np.abs(spectral.divergence(pv, T3)).max() <= 1e-12 * np.abs(spectral.gradient(pv, T3)).max()


def test_harmonic_extension_examples():
    grid = make_grid(2, 2 * np.pi, 6.0, 16, 49, 1.0, 2)
    x = grid.xt
    ext = spectral.harmonic_extension(np.sin(x), grid)
    assert np.allclose(ext, np.exp(-grid.xn)[:, None] * np.sin(x)[None], atol=1e-13)
    assert np.allclose(spectral.harmonic_extension(np.ones(16), grid), 1.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_harmonic_extension_max_principle(seed):
    grid = make_grid(2, 2 * np.pi, 6.0, 32, 33, 1.0, 2)
    b = band_limited(Torus.tangential(grid), np.random.default_rng(seed))
    e = spectral.harmonic_extension(b, grid)
    assert np.abs(e).max() <= np.abs(b).max() * (1 + 1e-12)


def test_harmonic_extension_mode_ode_second_order():
    errs = []
    for nn in (65, 129, 257):
        grid = make_grid(2, 2 * np.pi, 4.0, 8, nn, 1.0, 2)
        x = grid.xt
        e = spectral.harmonic_extension(np.cos(2 * x), grid)[:, 0]
        h = grid.dx_n
        d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / h**2
        errs.append(np.abs(d2 - 4 * e[1:-1]).max())
    assert np.log2(errs[0] / errs[1]) > 1.9 and np.log2(errs[1] / errs[2]) > 1.9


def test_heat_propagate_examples():
    x1, x2 = coords(T2)
    f = np.cos(x1) + 0.3 * np.sin(2 * x2)
    s = SpectralSlice.from_real(f, T2)
    assert np.allclose(spectral.heat_propagate(s, 0.0).to_real(), f)
    one = spectral.heat_propagate(SpectralSlice.from_real(np.cos(x1), T2), 1.0).to_real()
    assert np.allclose(one, np.exp(-1) * np.cos(x1), atol=1e-14)
    a = spectral.heat_propagate(spectral.heat_propagate(s, 0.13), 0.29).to_real()
    b = spectral.heat_propagate(s, 0.42).to_real()
    assert np.abs(a - b).max() <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.03, 2.0))
def test_heat_propagate_maximum_principle(seed, t):
    f = band_limited(T2, np.random.default_rng(seed), cutoff=1.0)
    out = spectral.heat_propagate(SpectralSlice.from_real(f, T2), t).to_real()
    assert np.abs(out).max() <= np.abs(f).max() + 1e-12


def test_threads_setting(monkeypatch):
    monkeypatch.setenv("HSTOKES_THREADS", "3")
    spectral.set_threads(None)
    assert spectral.get_threads() == 3
    spectral.set_threads(2)
    assert spectral.get_threads() == 2
    spectral.set_threads(None)
    with pytest.raises(ValueError):
        spectral.set_threads(0)
