import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelab.exit import (DegreeProfile, area_balance, bp_threshold_exit, cnd_exit, cnd_inverse,
                          exit_curves, intersections, map_threshold_area, tunnel_open, vnd_demap_exit)
from wavelab.functions import j_fun, j_inv
from wavelab.ga_de import ebn0_to_esn0, find_threshold_db
from wavelab.mapping import uniform_mapping
from wavelab.protograph import build_coupled, get_code

R36 = DegreeProfile.regular(3, 6)


def test_profiles_from_codes():
    p1 = DegreeProfile.from_base_matrix(get_code("C1").uncoupled_matrix)
    assert p1 == R36
    p3 = DegreeProfile.from_base_matrix(get_code("C3").uncoupled_matrix)
    p4 = DegreeProfile.from_base_matrix(get_code("C4").uncoupled_matrix)
    assert p3 == p4 == DegreeProfile({4: 1.0}, {16: 1.0}, {4: 1.0})


def test_irregular_profile_fractions():
    p = DegreeProfile.from_base_matrix(np.array([[1, 2], [1, 1]]))
    assert p.lam == {2: 0.4, 3: 0.6}
    assert p.rho == {3: 0.6, 2: 0.4}
    assert p.L_node == {2: 0.5, 3: 0.5}


def test_cnd_closed_form_values():
    # check of degree 6: I_E = 1 - J(5 J^-1(1 - I_A))
    for ia in (0.2, 0.6, 0.95):
        assert cnd_exit(R36, ia) == pytest.approx(1 - j_fun(5 * j_inv(1 - ia)))
    assert cnd_exit(R36, 1.0) == pytest.approx(1.0)
    assert cnd_exit(R36, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_vnd_flat_channel_closed_form():
    c = 0.45
    for ia in (0.0, 0.3, 0.8):
        expect = j_fun(j_inv(c) + 2 * j_inv(ia))
        assert vnd_demap_exit(R36, lambda x: np.full_like(x, c), ia) == pytest.approx(expect)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 0.999))
def test_cnd_inverse_roundtrip(ia):
    y = cnd_exit(R36, ia)
    assert cnd_exit(R36, cnd_inverse(R36, y)) == pytest.approx(y, abs=1e-12)
    if ia > 0.05:  # the curve is nearly flat near zero
        assert cnd_inverse(R36, y) == pytest.approx(ia, abs=1e-7)


def test_cnd_monotone():
    x = np.linspace(0, 1, 1000)
    assert np.all(np.diff(cnd_exit(R36, x)) >= 0)


def test_tunnel_and_intersections(bpsk_cache):
    cache = bpsk_cache(0.5)
    open_ = cache.at(ebn0_to_esn0(2.0, 0.5))
    closed = cache.at(ebn0_to_esn0(0.8, 0.5))
    assert tunnel_open(R36, open_)
    assert intersections(R36, open_) == [1.0]
    assert area_balance(R36, open_) is None
    assert not tunnel_open(R36, closed)
    pts = intersections(R36, closed)
    assert len(pts) >= 3 and pts == sorted(pts)
    pair = exit_curves(R36, closed)
    assert pair.grid.size == 1001


def test_bpsk_exit_thresholds_bracket_ga_de(bpsk_cache):
    cache = bpsk_cache(0.5)
    bp = bp_threshold_exit(R36, cache, (0.0, 3.0), 1e-3, rate=0.5)
    mp = map_threshold_area(R36, cache, (-1.0, 3.0), 1e-3, rate=0.5)
    assert mp < bp
    # EXIT approximates the check node through J-duality, DE through phi
    ens = build_coupled(get_code("C1", "uncoupled"))
    de = find_threshold_db(ens, uniform_mapping(4, 1, 2, "gray"), {"gray": cache}, (0.0, 3.0), 1e-3)
    assert abs(bp - de) < 0.15


def test_area_threshold_tracks_coupled_de(bpsk_cache):
    # two routes to the saturated threshold: equal-area rule and GA-DE of the
    # terminated chain
    cache = bpsk_cache(0.5)
    mp = map_threshold_area(R36, cache, (-1.0, 3.0), 1e-3, rate=0.5)
    ens = build_coupled(get_code("C1", "terminated", 50))
    de = find_threshold_db(ens, uniform_mapping(4, 50, 2, "gray"), {"gray": cache}, (0.0, 3.0), 2e-3)
    assert abs(mp - de) < 0.06


def test_tunnel_monotone_in_snr(bpsk_cache):
    cache = bpsk_cache(0.5)
    states = [tunnel_open(R36, cache.at(ebn0_to_esn0(s, 0.5))) for s in np.linspace(0.5, 2.0, 16)]
    assert states == sorted(states)
