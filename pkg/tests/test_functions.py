import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from wavelab.functions import MEAN_CAP, j_fun, j_inv, phi_fun, phi_inv, phi_quadrature

# Frozen with a 30-digit mpmath evaluation of the closed form.
J_ORACLE = {0.1: 0.0357973995216663, 1.0: 0.290122894384856,
            4.0: 0.721762347169196, 10.0: 0.950100227137031}
# Frozen from mpmath quadrature of the tanh form 1 - E[tanh(u/2)], u ~ N(x, 2x).
PHI_ORACLE = {0.01: 0.995024794328709, 0.5: 0.7959457343665, 2.0: 0.449599509206673,
              10.0: 0.0384628113693827, 50.0: 8.92820042892185e-7}


@pytest.mark.parametrize("mu,expected", sorted(J_ORACLE.items()))
def test_j_matches_high_precision_values(mu, expected):
    assert j_fun(mu) == pytest.approx(expected, abs=1e-12)


def _j_exact(mu):
    """MI of a consistent Gaussian LLR by direct integration."""
    s = math.sqrt(2 * mu)
    f = lambda l: math.exp(-(l - mu) ** 2 / (4 * mu)) / math.sqrt(4 * math.pi * mu) * \
        math.log2(1 + math.exp(-l))
    return 1 - quad(f, mu - 12 * s, mu + 12 * s, limit=200)[0]


@pytest.mark.parametrize("mu", [0.05, 0.5, 2.0, 8.0, 30.0])
def test_j_closed_form_tracks_exact_integral(mu):
    # the three-constant fit is good to a few 1e-3
    assert abs(j_fun(mu) - _j_exact(mu)) < 2e-3


def test_j_endpoints():
    assert j_fun(0.0) == 0.0
    assert j_inv(0.0) == 0.0
    assert j_inv(1.0) == MEAN_CAP
    assert j_fun(MEAN_CAP) == 1.0


def test_j_roundtrip_dense():
    # above ~100 J rounds to 1.0 in double precision
    mu = np.geomspace(1e-4, 50, 2000)
    assert np.max(np.abs(j_inv(j_fun(mu)) - mu) / mu) < 1e-5
    mi = np.linspace(1e-4, 1 - 1e-6, 2000)
    assert np.max(np.abs(j_fun(j_inv(mi)) - mi)) < 1e-5


def test_j_monotone():
    mu = np.linspace(0, 100, 1000)
    assert np.all(np.diff(j_fun(mu)) > 0)
    mi = np.linspace(0, 1, 1000)
    assert np.all(np.diff(j_inv(mi)) >= 0)


def test_j_rejects_out_of_domain():
    with pytest.raises(ValueError):
        j_fun(-1.0)
    with pytest.raises(ValueError):
        j_inv(1.5)


@pytest.mark.parametrize("x,expected", sorted(PHI_ORACLE.items()))
def test_phi_matches_tanh_integral(x, expected):
    assert phi_fun(x) == pytest.approx(expected, rel=2e-6)


@pytest.mark.parametrize("x", [1e-3, 0.3, 3.0, 25.0, 120.0])
def test_phi_quadrature_is_the_tanh_integral(x):
    # two routes: the sech form used for the table against scipy on the tanh form
    s = math.sqrt(2 * x)
    f = lambda u: math.tanh(u / 2) * math.exp(-(u - x) ** 2 / (4 * x))
    tanh_form = 1 - quad(f, x - 15 * s, x + 15 * s, points=[x], limit=400)[0] / math.sqrt(4 * math.pi * x)
    assert phi_quadrature(x) == pytest.approx(tanh_form, rel=1e-6, abs=1e-12)


def test_phi_at_zero_is_one():
    assert phi_fun(0.0) == 1.0
    assert phi_inv(1.0) == 0.0


def test_phi_roundtrip_dense():
    x = np.geomspace(1e-6, 500, 3000)
    assert np.max(np.abs(phi_inv(phi_fun(x)) - x) / x) < 1e-5


def test_phi_monotone():
    x = np.linspace(0, 60, 1000)
    y = phi_fun(x)
    assert np.all(np.diff(y) < 0)
    assert np.all(np.diff(phi_inv(y[1:])) > 0)


def test_phi_small_x_series():
    x = 1e-7
    assert 1 - phi_fun(x) == pytest.approx(x / 2, rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-8, 800.0))
def test_phi_roundtrip_property(x):
    assert phi_inv(phi_fun(x)) == pytest.approx(x, rel=1e-5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_j_roundtrip_property(mi):
    back = j_fun(j_inv(mi))
    if mi < 1.0 - 1e-9:
        assert back == pytest.approx(mi, abs=1e-5)
    else:
        assert back >= 1.0 - 1e-5
