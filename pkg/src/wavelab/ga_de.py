"""Gaussian-approximation protograph density evolution with the demapper in
the loop, an exact erasure-channel mode, and threshold bisection.

One iteration (flooding, every update from the previous check-to-variable
means ``cv``):

* demapper:  mu_D[i] = J^-1( sum_l D[l, i] f_l( J(sum_k B[k, i] cv[k, i]) ) )
* variable:  vc[j, i] = mu_D[i] + sum_k B[k, i] cv[k, i] - cv[j, i]
* check:     cv'[j, i] = phi^-1( 1 - (1 - phi(vc[j, i]))^(B[j, i] - 1)
                                  * prod_{k != i} (1 - phi(vc[j, k]))^B[j, k] )

Parallel edges between the same node pair carry identical means, so one
slot per nonzero entry of the base matrix is enough; multiplicities enter
as exponents and weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .demapper import DemapperCurveSet, K
from .functions import (MEAN_CAP, j_inv, j_inv_scalar, j_scalar, log_one_minus_phi,
                        phi_inv_from_log, phi_table)
from .mapping import MappingMatrix
from .protograph import CoupledEnsemble

SUCCESS_MI = 1.0 - 1e-6
STALL_TOL = 1e-8
MAX_ITER = 40_000


class BracketError(ValueError):
    def __init__(self, msg, lo_ok=None, hi_ok=None):
        super().__init__(msg)
        self.lo_ok = lo_ok
        self.hi_ok = hi_ok


@dataclass(frozen=True, eq=False)
class EdgeGraph:
    """Nonzero entries of a base matrix as an edge list with CSR groupings."""

    check: np.ndarray
    var: np.ndarray
    mult: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    chk_ptr: np.ndarray
    chk_edges: np.ndarray
    n_checks: int
    n_vars: int


@lru_cache(maxsize=64)
def _edge_graph_cached(key: bytes, shape: tuple) -> EdgeGraph:
    b = np.frombuffer(key, dtype=np.int64).reshape(shape)
    chk, var = np.nonzero(b)
    mult = b[chk, var].astype(np.float64)
    by_var = np.argsort(var, kind="stable")
    var_ptr = np.searchsorted(var[by_var], np.arange(shape[1] + 1))
    by_chk = np.argsort(chk, kind="stable")
    chk_ptr = np.searchsorted(chk[by_chk], np.arange(shape[0] + 1))
    return EdgeGraph(chk, var, mult, var_ptr, by_var, chk_ptr, by_chk, shape[0], shape[1])


def edge_graph(ensemble: CoupledEnsemble) -> EdgeGraph:
    b = np.ascontiguousarray(ensemble.base.entries, dtype=np.int64)
    return _edge_graph_cached(b.tobytes(), b.shape)


@dataclass
class MeanState:
    """Message means of one DE iteration, one slot per base-matrix nonzero."""

    cv_means: np.ndarray
    vc_means: np.ndarray
    demap_means: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, ensemble: CoupledEnsemble) -> "MeanState":
        g = edge_graph(ensemble)
        n_e = g.check.size
        return cls(np.zeros(n_e), np.zeros(n_e), np.zeros(g.n_vars), 0)


@dataclass
class DeResult:
    converged: bool
    iterations_used: int
    per_position_error: np.ndarray  # (iterations_used + 1, n_positions)
    final_mi: np.ndarray            # a-posteriori MI per variable type
    state: MeanState | None = field(default=None, repr=False)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _interp_uniform(grid, row, x):
    n = grid.shape[0]
    if x <= grid[0]:
        return row[0]
    if x >= grid[n - 1]:
        return row[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if grid[mid] <= x:
            lo = mid
        else:
            hi = mid
    t = (x - grid[lo]) / (grid[hi] - grid[lo])
    return row[lo] + t * (row[hi] - row[lo])


@numba.njit(cache=True)
def _demap_and_app(cv, mult, var_ptr, var_edges, dmat, table, grid, s_out, mud_out, app_out):
    n_vars = var_ptr.shape[0] - 1
    n_ch = dmat.shape[0]
    for n in range(n_vars):
        s = 0.0
        for p in range(var_ptr[n], var_ptr[n + 1]):
            e = var_edges[p]
            s += mult[e] * cv[e]
        ia = j_scalar(s)
        mix = 0.0
        for l in range(n_ch):
            wgt = dmat[l, n]
            if wgt != 0.0:
                mix += wgt * _interp_uniform(grid, table[l], ia)
        if mix > 1.0:
            mix = 1.0
        mud = j_inv_scalar(mix)
        s_out[n] = s
        mud_out[n] = mud
        app_out[n] = min(mud + s, MEAN_CAP)


@numba.njit(cache=True)
def _vnd_cnd(cv, app, check, var, mult, chk_ptr, chk_edges, lx, w, vc_out, cv_out):
    n_e = cv.shape[0]
    for e in range(n_e):
        v = app[var[e]] - cv[e]
        if v < 0.0:
            v = 0.0
        vc_out[e] = min(v, MEAN_CAP)
    n_chk = chk_ptr.shape[0] - 1
    for m in range(n_chk):
        total = 0.0
        zeros = 0.0
        for p in range(chk_ptr[m], chk_ptr[m + 1]):
            e = chk_edges[p]
            if vc_out[e] <= 0.0:
                zeros += mult[e]
            else:
                total += mult[e] * log_one_minus_phi(vc_out[e], lx, w)
        for p in range(chk_ptr[m], chk_ptr[m + 1]):
            e = chk_edges[p]
            if vc_out[e] <= 0.0:
                z_ex = zeros - 1.0
                s_ex = total
            else:
                z_ex = zeros
                s_ex = total - log_one_minus_phi(vc_out[e], lx, w)
            if z_ex > 0.5:
                cv_out[e] = 0.0
            else:
                if s_ex > 0.0:
                    s_ex = 0.0
                cv_out[e] = phi_inv_from_log(s_ex, lx, w)


@numba.njit(cache=True)
def _position_error(app, block_of_var, n_blocks, out):
    counts = np.zeros(n_blocks)
    for b in range(n_blocks):
        out[b] = 0.0
    for n in range(app.shape[0]):
        b = block_of_var[n]
        out[b] += 0.5 * math.erfc(math.sqrt(app[n] / 2.0) / math.sqrt(2.0))
        counts[b] += 1.0
    for b in range(n_blocks):
        out[b] /= counts[b]


@numba.njit(cache=True)
def _run_kernel(cv0, check, var, mult, var_ptr, var_edges, chk_ptr, chk_edges,
                dmat, table, grid, lx, w, max_iter, success_mean, stall_tol,
                block_of_var, n_blocks, record):
    n_vars = var_ptr.shape[0] - 1
    n_e = cv0.shape[0]
    cv = cv0.copy()
    vc = np.zeros(n_e)
    nxt = np.empty(n_e)
    s = np.empty(n_vars)
    mud = np.empty(n_vars)
    app = np.empty(n_vars)
    mi_prev = np.full(n_vars, -1.0)
    rows = max_iter + 1 if record else 1
    traj = np.zeros((rows, n_blocks))
    it = 0
    converged = False
    while True:
        _demap_and_app(cv, mult, var_ptr, var_edges, dmat, table, grid, s, mud, app)
        if record:
            _position_error(app, block_of_var, n_blocks, traj[it])
        ok = True
        delta = 0.0
        for n in range(n_vars):
            if app[n] < success_mean:
                ok = False
            mi = j_scalar(app[n])
            d = abs(mi - mi_prev[n])
            if d > delta:
                delta = d
            mi_prev[n] = mi
        if ok:
            converged = True
            break
        if it >= max_iter or (it > 0 and delta < stall_tol):
            break
        _vnd_cnd(cv, app, check, var, mult, chk_ptr, chk_edges, lx, w, vc, nxt)
        for e in range(n_e):
            cv[e] = nxt[e]
        it += 1
    if not record:
        _position_error(app, block_of_var, n_blocks, traj[0])
    return cv, vc, mud, app, it, converged, traj


# --------------------------------------------------------------------------
# python API
# --------------------------------------------------------------------------

def channel_table(curves) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-bit curves as a (2K, G) table: Gray rows then SP rows.

    ``curves`` maps 'gray' / 'sp' to a :class:`DemapperCurveSet`; a missing
    family gets zero rows (it must then carry no mapping weight).
    """
    grid = None
    for cs in curves.values():
        if cs is not None:
            if grid is not None and not np.array_equal(grid, cs.grid):
                raise ValueError("curve sets must share one I_A grid")
            grid = cs.grid
    if grid is None:
        raise ValueError("no curves given")
    table = np.zeros((2 * K, grid.size))
    for fam, off in (("gray", 0), ("sp", K)):
        cs = curves.get(fam)
        if cs is not None:
            table[off:off + K] = cs.per_bit
    return np.ascontiguousarray(grid, dtype=float), table


def _check_inputs(ensemble, mapping, curves):
    g = edge_graph(ensemble)
    if mapping.d.shape[1] != g.n_vars:
        raise ValueError(f"mapping has {mapping.d.shape[1]} columns, ensemble has {g.n_vars} variable types")
    for fam, off in (("gray", 0), ("sp", K)):
        if curves.get(fam) is None and np.any(mapping.d[off:off + K] > 0):
            raise ValueError(f"mapping uses {fam} channels but no {fam} curves were given")
    return g


def _blocks(ensemble):
    n_pos = ensemble.n_positions
    npr = ensemble.n_prime
    return np.repeat(np.arange(n_pos), npr).astype(np.int64), n_pos


def de_step(ensemble: CoupledEnsemble, mapping: MappingMatrix, curves: dict,
            state: MeanState) -> MeanState:
    """One flooding iteration from ``state``."""
    g = _check_inputs(ensemble, mapping, curves)
    grid, table = channel_table(curves)
    lx, w = phi_table()
    n = g.n_vars
    s, mud, app = np.empty(n), np.empty(n), np.empty(n)
    _demap_and_app(state.cv_means, g.mult, g.var_ptr, g.var_edges, mapping.d, table, grid, s, mud, app)
    vc, nxt = np.empty_like(state.cv_means), np.empty_like(state.cv_means)
    _vnd_cnd(state.cv_means, app, g.check, g.var, g.mult, g.chk_ptr, g.chk_edges, lx, w, vc, nxt)
    return MeanState(nxt, vc, mud, state.iteration + 1)


def app_means(ensemble, mapping, curves, state: MeanState) -> np.ndarray:
    g = _check_inputs(ensemble, mapping, curves)
    grid, table = channel_table(curves)
    n = g.n_vars
    s, mud, app = np.empty(n), np.empty(n), np.empty(n)
    _demap_and_app(state.cv_means, g.mult, g.var_ptr, g.var_edges, mapping.d, table, grid, s, mud, app)
    return app


def run_de(ensemble: CoupledEnsemble, mapping: MappingMatrix, curves: dict,
           max_iter: int = MAX_ITER, success_mi: float = SUCCESS_MI,
           stall_tol: float = STALL_TOL, record: bool = True,
           state: MeanState | None = None) -> DeResult:
    """Iterate until every variable type reaches ``success_mi`` a-posteriori
    MI, the iteration budget runs out, or the MI stops moving."""
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    g = _check_inputs(ensemble, mapping, curves)
    grid, table = channel_table(curves)
    lx, w = phi_table()
    blocks, n_pos = _blocks(ensemble)
    cv0 = np.zeros(g.check.size) if state is None else state.cv_means
    success_mean = float(j_inv(success_mi))
    cv, vc, mud, app, it, ok, traj = _run_kernel(
        cv0, g.check, g.var, g.mult, g.var_ptr, g.var_edges, g.chk_ptr, g.chk_edges,
        np.ascontiguousarray(mapping.d), table, grid, lx, w, int(max_iter), success_mean,
        float(stall_tol), blocks, n_pos, record)
    traj = traj[: it + 1] if record else traj
    final_mi = np.array([min(1.0, j_inv_to_mi(a)) for a in app])
    return DeResult(bool(ok), int(it), traj, final_mi, MeanState(cv, vc, mud, it))


def j_inv_to_mi(mean: float) -> float:
    return float(j_scalar(mean))


# --------------------------------------------------------------------------
# SNR handling and threshold search
# --------------------------------------------------------------------------

def ebn0_to_esn0(ebn0_db: float, rate: float, bits_per_symbol: int = K) -> float:
    return ebn0_db + 10.0 * math.log10(bits_per_symbol * float(rate))


def esn0_to_ebn0(esn0_db: float, rate: float, bits_per_symbol: int = K) -> float:
    return esn0_db - 10.0 * math.log10(bits_per_symbol * float(rate))


def curves_at(curve_cache: dict, esn0_db: float, families, non_iterative=()) -> dict:
    out = {}
    for fam in families:
        cs = curve_cache[fam].at(esn0_db)
        out[fam] = cs.flattened() if fam in non_iterative else cs
    return out


def used_families(mapping: MappingMatrix) -> tuple[str, ...]:
    fams = []
    if np.any(mapping.d[:mapping.K] > 0):
        fams.append("gray")
    if np.any(mapping.d[mapping.K:] > 0):
        fams.append("sp")
    return tuple(fams)


@dataclass
class ThresholdProbe:
    """Callable: does DE converge at a given Eb/N0?"""

    ensemble: CoupledEnsemble
    mapping: MappingMatrix
    curve_cache: dict
    rate: float | None = None
    non_iterative: tuple = ()
    de_kwargs: dict = field(default_factory=dict)
    evaluations: int = 0

    def __call__(self, ebn0_db: float) -> bool:
        rate = float(self.ensemble.reference_rate) if self.rate is None else self.rate
        es = ebn0_to_esn0(ebn0_db, rate, self.mapping.K)
        curves = curves_at(self.curve_cache, es, used_families(self.mapping), self.non_iterative)
        self.evaluations += 1
        kw = {"record": False, **self.de_kwargs}
        return run_de(self.ensemble, self.mapping, curves, **kw).converged


def bisect_threshold(ok, bracket, tol_db: float, give_up_above: float | None = None) -> float:
    """Bisection on a monotone pass/fail predicate.

    With ``give_up_above`` set, the predicate is tried there first; failure
    means the threshold exceeds it, and ``inf`` is returned at once.
    """
    lo, hi = map(float, bracket)
    if give_up_above is not None and give_up_above < hi:
        if not ok(give_up_above):
            return math.inf
        hi = give_up_above
    else:
        hi_ok = ok(hi)
        if not hi_ok:
            raise BracketError(f"DE fails at the upper end {hi} dB", ok(lo), False)
    lo_ok = ok(lo)
    if lo_ok:
        raise BracketError(f"DE succeeds at the lower end {lo} dB", True, True)
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def find_threshold_db(ensemble: CoupledEnsemble, mapping: MappingMatrix, curve_cache: dict,
                      bracket=(0.0, 8.0), tol_db: float = 0.01, rate: float | None = None,
                      non_iterative=(), give_up_above: float | None = None,
                      **de_kwargs) -> float:
    """Eb/N0 (dB) DE threshold by bisection; ``rate`` defaults to the
    ensemble's reference rate so terminated chains are not charged rate loss."""
    probe = ThresholdProbe(ensemble, mapping, curve_cache, rate, tuple(non_iterative), de_kwargs)
    return bisect_threshold(probe, bracket, tol_db, give_up_above)


# --------------------------------------------------------------------------
# binary erasure channel
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _bec_kernel(eps_var, check, var, mult, var_ptr, var_edges, chk_ptr, chk_edges,
                max_iter, block_of_var, n_blocks, success, stall_tol):
    n_e = check.shape[0]
    n_vars = var_ptr.shape[0] - 1
    cv = np.ones(n_e)
    vc = np.empty(n_e)
    app = np.empty(n_vars)
    traj = np.zeros((max_iter + 1, n_blocks))
    counts = np.zeros(n_blocks)
    for n in range(n_vars):
        counts[block_of_var[n]] += 1.0
    prev_max = 2.0
    it = 0
    converged = False
    while True:
        for n in range(n_vars):
            p = eps_var[n]
            for q in range(var_ptr[n], var_ptr[n + 1]):
                e = var_edges[q]
                p *= cv[e] ** mult[e]
            app[n] = p
            traj[it, block_of_var[n]] += p / counts[block_of_var[n]]
        mx = 0.0
        for n in range(n_vars):
            mx = max(mx, app[n])
        if mx < success:
            converged = True
            break
        if it >= max_iter or abs(prev_max - mx) < stall_tol:
            break
        prev_max = mx
        for e in range(n_e):
            # leave-one-out product; cv[e] may be zero
            n = var[e]
            p = eps_var[n] * cv[e] ** (mult[e] - 1.0)
            for q in range(var_ptr[n], var_ptr[n + 1]):
                f = var_edges[q]
                if f != e:
                    p *= cv[f] ** mult[f]
            vc[e] = p
        for m in range(chk_ptr.shape[0] - 1):
            for q in range(chk_ptr[m], chk_ptr[m + 1]):
                e = chk_edges[q]
                prod = (1.0 - vc[e]) ** (mult[e] - 1.0)
                for r in range(chk_ptr[m], chk_ptr[m + 1]):
                    f = chk_edges[r]
                    if f != e:
                        prod *= (1.0 - vc[f]) ** mult[f]
                cv[e] = 1.0 - prod
        it += 1
    return it, converged, traj[: it + 1]


def bec_de(ensemble: CoupledEnsemble, epsilon: float, known_positions=(), max_iter: int = 5000,
           known_fraction: float = 1.0, success: float = 1e-12,
           stall_tol: float = 1e-15) -> DeResult:
    """Erasure-probability DE on the protograph.

    ``known_positions`` are 1-based sub-block indices whose channel erasure
    probability is scaled to ``(1 - known_fraction) * epsilon``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    n_pos = ensemble.n_positions
    for z in known_positions:
        if not 1 <= z <= n_pos:
            raise ValueError(f"position {z} outside 1..{n_pos}")
    g = edge_graph(ensemble)
    blocks, _ = _blocks(ensemble)
    eps = np.full(g.n_vars, float(epsilon))
    for z in known_positions:
        eps[blocks == z - 1] = (1.0 - known_fraction) * epsilon
    it, ok, traj = _bec_kernel(eps, g.check, g.var, g.mult, g.var_ptr, g.var_edges,
                               g.chk_ptr, g.chk_edges, int(max_iter), blocks, n_pos,
                               float(success), float(stall_tol))
    return DeResult(bool(ok), int(it), traj, 1.0 - traj[-1])


def bec_threshold_regular(dv: int, dc: int, tol: float = 1e-7) -> float:
    """Scalar (dv, dc) BEC threshold from x = eps (1 - (1 - x)^(dc-1))^(dv-1)."""
    def ok(eps):
        x = eps
        for _ in range(100_000):
            nx = eps * (1 - (1 - x) ** (dc - 1)) ** (dv - 1)
            if nx < 1e-12:
                return True
            if abs(nx - x) < 1e-15:
                return False
            x = nx
        return False
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
