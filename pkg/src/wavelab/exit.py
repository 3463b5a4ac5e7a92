"""EXIT-chart thresholds from degree profiles.

The charts see only the node-degree profile of the uncoupled base matrix, so
protograph structure (and hence the difference between, say, C3 and C4) is
invisible here.  The equal-area estimate of the coupled threshold is the
erasure-channel area rule applied heuristically to the AWGN/demapper chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .demapper import DemapperCurveSet
from .functions import j_fun, j_inv
from .ga_de import BracketError, bisect_threshold, ebn0_to_esn0

GRID_STEP = 1e-3


@dataclass(frozen=True)
class DegreeProfile:
    """Edge-perspective ``lam``/``rho`` and node-perspective ``L_node``, as
    dicts degree -> fraction."""

    lam: dict
    rho: dict
    L_node: dict

    @classmethod
    def from_base_matrix(cls, b) -> "DegreeProfile":
        b = np.asarray(getattr(b, "entries", b))
        vdeg = b.sum(axis=0)
        cdeg = b.sum(axis=1)
        edges = vdeg.sum()
        lam, rho, node = {}, {}, {}
        for d in vdeg:
            lam[int(d)] = lam.get(int(d), 0.0) + d / edges
            node[int(d)] = node.get(int(d), 0.0) + 1.0 / len(vdeg)
        for d in cdeg:
            rho[int(d)] = rho.get(int(d), 0.0) + d / edges
        return cls(lam, rho, node)

    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeProfile":
        return cls({dv: 1.0}, {dc: 1.0}, {dv: 1.0})


@dataclass
class ExitCurvePair:
    grid: np.ndarray
    vnd_demap: np.ndarray
    cnd_inv: np.ndarray


def _avg_curve(demap_curve):
    if isinstance(demap_curve, DemapperCurveSet):
        g, f = demap_curve.grid, demap_curve.average
        return lambda x: np.interp(x, g, f)
    return demap_curve


def cnd_exit(profile: DegreeProfile, i_a):
    i_a = np.clip(np.asarray(i_a, dtype=float), 0.0, 1.0)
    mu = j_inv(1.0 - i_a)
    out = 1.0 - sum(r * j_fun((d - 1) * mu) for d, r in profile.rho.items())
    return out[()] if np.ndim(out) == 0 else out


def cnd_inverse(profile: DegreeProfile, i_e, iters: int = 60):
    """Solve ``cnd_exit(x) == i_e`` for x by vectorized bisection."""
    y = np.atleast_1d(np.asarray(i_e, dtype=float))
    lo, hi = np.zeros_like(y), np.ones_like(y)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = cnd_exit(profile, mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return out[0] if np.ndim(i_e) == 0 else out


def vnd_demap_exit(profile: DegreeProfile, demap_curve, i_a):
    """Variable-node EXIT with the demapper: ``demap_curve`` is a curve set
    (its bit-averaged curve is used) or a callable ``f_D(I_A)``."""
    f_d = _avg_curve(demap_curve)
    i_a = np.clip(np.asarray(i_a, dtype=float), 0.0, 1.0)
    mu_a = j_inv(i_a)
    to_demapper = sum(l * j_fun(d * mu_a) for d, l in profile.L_node.items())
    mu_c = j_inv(np.clip(f_d(to_demapper), 0.0, 1.0))
    out = sum(l * j_fun(np.minimum(mu_c + (d - 1) * mu_a, 1e3)) for d, l in profile.lam.items())
    return out[()] if np.ndim(out) == 0 else out


def exit_curves(profile: DegreeProfile, demap_curve, step: float = GRID_STEP) -> ExitCurvePair:
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    return ExitCurvePair(grid, vnd_demap_exit(profile, demap_curve, grid), cnd_inverse(profile, grid))


def tunnel_open(profile: DegreeProfile, demap_curve, step: float = GRID_STEP) -> bool:
    pair = exit_curves(profile, demap_curve, step)
    return bool(np.all(pair.vnd_demap[:-1] > pair.cnd_inv[:-1]))


def intersections(profile: DegreeProfile, demap_curve, step: float = GRID_STEP) -> list[float]:
    """Points in (0, 1] where the VND curve meets the inverted CND curve.

    Sign changes on the grid are refined with Brent's method; a grid point
    where the difference is exactly zero is a touch and is listed twice.
    """
    pair = exit_curves(profile, demap_curve, step)
    diff = pair.vnd_demap - pair.cnd_inv
    f = lambda x: float(vnd_demap_exit(profile, demap_curve, x) - cnd_inverse(profile, x))
    pts = []
    for k in range(len(diff) - 2):
        a, b = diff[k], diff[k + 1]
        if a == 0.0 and k > 0:
            pts += [pair.grid[k], pair.grid[k]]
        elif a * b < 0:
            pts.append(brentq(f, pair.grid[k], pair.grid[k + 1], xtol=1e-8))
    pts.append(1.0)
    return pts


def area_balance(profile: DegreeProfile, demap_curve, step: float = GRID_STEP):
    """``(A12, A23)`` between the first three intersections, or ``None`` if
    the chart has fewer than three."""
    pts = intersections(profile, demap_curve, step)
    if len(pts) < 3:
        return None
    x1, x2, x3 = pts[:3]

    def area(a, b, sign):
        if b <= a:
            return 0.0
        n = max(2, int(math.ceil((b - a) / step)) + 1)
        x = np.linspace(a, b, n)
        d = vnd_demap_exit(profile, demap_curve, x) - cnd_inverse(profile, x)
        return float(np.trapezoid(sign * d, x))

    return area(x1, x2, -1.0), area(x2, x3, 1.0)


def _probe(curve_cache, rate, bits):
    def curves(ebn0):
        return curve_cache.at(ebn0_to_esn0(ebn0, rate, bits))
    return curves


def bp_threshold_exit(profile: DegreeProfile, curve_cache, bracket=(0.0, 9.0),
                      tol_db: float = 0.01, rate: float = 0.5, bits_per_symbol: int = 4) -> float:
    """Smallest Eb/N0 with an open decoding tunnel."""
    curves = _probe(curve_cache, rate, bits_per_symbol)
    return bisect_threshold(lambda s: tunnel_open(profile, curves(s)), bracket, tol_db)


def map_threshold_area(profile: DegreeProfile, curve_cache, bracket=(0.0, 9.0),
                       tol_db: float = 0.01, rate: float = 0.5, bits_per_symbol: int = 4) -> float:
    """Eb/N0 where the two lobes between the first three intersections of the
    chart enclose equal area."""
    curves = _probe(curve_cache, rate, bits_per_symbol)

    def balanced_or_better(s):
        cs = curves(s)
        if tunnel_open(profile, cs):
            return True
        ab = area_balance(profile, cs)
        if ab is None:
            return False
        return ab[1] >= ab[0]

    return bisect_threshold(balanced_or_better, bracket, tol_db)
