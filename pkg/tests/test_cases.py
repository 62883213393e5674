import numpy as np
import pytest

from hstokes.cases import CASE_NAMES, build_case, load_data
from hstokes.domain import save_field


@pytest.mark.parametrize("name", CASE_NAMES)
def test_cases_are_compatible(name):
    case = build_case(name, grid=dict(n_normal=33, n_time=9))
    assert case.data().compatibility().passed
    assert case.kind == ("navier-stokes" if name.endswith("-ns") else "stokes")


def test_case_options():
    with pytest.raises(ValueError):
        build_case("unknown")
    c = build_case("small-ns", grid=dict(n_normal=33, n_time=9))
    assert c.amplitude == 0.1 and build_case("large-ns").amplitude == 10.0
    r = c.refined(2, 2, 2)
    assert (r.grid.n_normal, r.grid.n_time, r.grid.n_tangential) == (65, 17, 32)
    h = build_case("tangential-mode", grid=dict(n_normal=33, n_time=9), h_amplitude=0.5).data().h
    assert h.shape == (2, 33, 16) and np.abs(h).max() > 0
    off = build_case("normal-mode", grid=dict(n_normal=33, n_time=9), gn_offset=0.2).data()
    assert off.compatibility().violations() == ["zero tangential mean of g_n at every t"]


def test_load_data_roundtrip(tmp_path):
    data = build_case("normal-mode", grid=dict(n_normal=33, n_time=9)).data()
    save_field(data.g, tmp_path / "g")
    back = load_data(data.grid, tmp_path / "g")
    assert np.array_equal(back.g.values, data.g.values) and back.h is None
    other = build_case("normal-mode", grid=dict(n_normal=17, n_time=9)).grid
    with pytest.raises(ValueError):
        load_data(other, tmp_path / "g")
