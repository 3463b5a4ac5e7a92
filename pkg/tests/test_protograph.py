import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelab.protograph import (BaseMatrix, CouplingSpec, ProtographError, build_coupled,
                                design_rate, get_code, load_codes, split_uniform, standard_codes)


def kron_tail_biting(components, L):
    """Independent route: sum of Kronecker products with cyclic shift matrices."""
    shift = np.roll(np.eye(L, dtype=np.int64), 1, axis=0)  # shift[(j+1) % L, j] = 1
    out = 0
    for i, c in enumerate(components):
        out = out + np.kron(np.linalg.matrix_power(shift, i), np.asarray(c))
    return out


def kron_terminated(components, L):
    W = len(components)
    out = 0
    for i, c in enumerate(components):
        place = np.zeros((L + W - 1, L), dtype=np.int64)
        place[np.arange(L) + i, np.arange(L)] = 1
        out = out + np.kron(place, np.asarray(c))
    return out


@pytest.mark.parametrize("name", ["C1", "C2", "C3", "C4"])
@pytest.mark.parametrize("L", [5, 12, 50])
def test_tail_biting_matches_kronecker_route(name, L):
    spec = standard_codes(L)[name]
    ens = build_coupled(spec)
    assert np.array_equal(ens.base.entries, kron_tail_biting(spec.components, L))


@pytest.mark.parametrize("name", ["C1", "C2", "C3", "C4"])
def test_terminated_matches_kronecker_route(name):
    spec = standard_codes(9)[name].with_mode("terminated")
    ens = build_coupled(spec)
    assert np.array_equal(ens.base.entries, kron_terminated(spec.components, 9))


def test_c1_tail_biting_is_regular_3_6():
    ens = build_coupled(get_code("C1", "tail_biting", 50))
    assert ens.base.entries.shape == (50, 100)
    assert set(ens.base.column_weights) == {3}
    assert set(ens.base.row_weights) == {6}


@pytest.mark.parametrize("name,rate", [("C1", Fraction(1, 2)), ("C2", Fraction(1, 2)),
                                       ("C3", Fraction(3, 4)), ("C4", Fraction(3, 4))])
def test_tail_biting_rate(name, rate):
    assert build_coupled(get_code(name)).rate == rate


def test_terminated_rate_loss():
    ens = build_coupled(get_code("C1", "terminated", 50))
    assert ens.rate == 1 - Fraction(52, 50) * Fraction(1, 2)
    assert ens.reference_rate == Fraction(1, 2)


def test_uncoupled_is_summed_matrix():
    ens = build_coupled(get_code("C4", "uncoupled"))
    assert ens.base.entries.tolist() == [[4, 4, 4, 4]]
    assert ens.n_positions == 1


def test_c3_c4_share_uncoupled_matrix():
    assert np.array_equal(get_code("C3").uncoupled_matrix, get_code("C4").uncoupled_matrix)


def test_split_uniform():
    assert [c.tolist() for c in split_uniform([[3, 3]], 3)] == [[[1, 1]]] * 3
    with pytest.raises(ProtographError):
        split_uniform([[3, 2]], 3)


def test_invalid_inputs_rejected():
    with pytest.raises(ProtographError):
        BaseMatrix([[1, -1]])
    with pytest.raises(ProtographError):
        BaseMatrix([[1, 0], [0, 0]])
    with pytest.raises(ProtographError):
        CouplingSpec(([[1, 1]], [[1, 1, 1]]))
    with pytest.raises(ProtographError):
        CouplingSpec(([[1, 1]], [[1, 1]]), L=1)
    with pytest.raises(ProtographError):
        CouplingSpec(([[1, 1]],), mode="ring")
    with pytest.raises(KeyError):
        get_code("C9")


def test_json_roundtrip(tmp_path):
    spec = standard_codes(20)["C4"].with_mode("terminated")
    path = tmp_path / "codes.json"
    path.write_text(json.dumps([spec.to_dict()]))
    back = load_codes(path)["C4"]
    assert back.mode == "terminated" and back.L == 20 and back.W == 2
    assert np.array_equal(build_coupled(back).base.entries, build_coupled(spec).base.entries)


def test_json_w_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "X", "components": [[[1, 1]]], "W": 2}))
    with pytest.raises(ProtographError):
        load_codes(path)


components = st.integers(1, 3).flatmap(lambda W: st.tuples(
    st.integers(1, 2), st.integers(2, 4)).flatmap(lambda mn: st.lists(
        st.lists(st.lists(st.integers(0, 2), min_size=mn[1], max_size=mn[1]),
                 min_size=mn[0], max_size=mn[0]), min_size=W, max_size=W)))


def _valid(comps):
    total = np.sum(np.array(comps), axis=0)
    return total.sum(axis=0).all() and total.sum(axis=1).all()


@settings(max_examples=60, deadline=None)
@given(components, st.integers(3, 9))
def test_tail_biting_preserves_degrees(comps, L):
    if not _valid(comps) or L < len(comps):
        return
    spec = CouplingSpec(tuple(comps), L=L)
    ens = build_coupled(spec)
    assert np.array_equal(ens.base.entries, kron_tail_biting(comps, L))
    # every sub-block sees the uncoupled degrees
    total = spec.uncoupled_matrix
    assert np.array_equal(ens.base.column_weights, np.tile(total.sum(axis=0), L))
    assert np.array_equal(ens.base.row_weights, np.tile(total.sum(axis=1), L))
    assert design_rate(ens) == 1 - Fraction(spec.m_prime, spec.n_prime)


@settings(max_examples=60, deadline=None)
@given(components, st.integers(3, 9))
def test_terminated_edges_conserved(comps, L):
    # the first and last check rows of the chain see only B_0 and B_{W-1}
    edge_rows_ok = np.all(np.sum(comps[0], axis=1)) and np.all(np.sum(comps[-1], axis=1))
    if not _valid(comps) or not edge_rows_ok or L < len(comps):
        return
    spec = CouplingSpec(tuple(comps), L=L, mode="terminated")
    ens = build_coupled(spec)
    assert ens.base.entries.sum() == L * spec.uncoupled_matrix.sum()
    loss = 1 - Fraction(spec.m_prime, spec.n_prime) - ens.rate
    assert loss == Fraction(spec.W - 1, L) * Fraction(spec.m_prime, spec.n_prime)
