"""Scalar maps of the Gaussian approximation: J, J^-1, phi and phi^-1.

``J(mu)`` is the mutual information of a consistent Gaussian LLR with mean
``mu`` (variance ``2 mu``), in the closed form with fitted constants
``H1, H2, H3``.  ``phi`` is the check-node mean map of Chung et al.

``phi`` is tabulated once from a quadrature of

    phi(x) = exp(-x/4) / sqrt(4 pi x) * int sech(v/2) exp(-v^2/(4x)) dv,

which is the printed tanh integral after completing the square.  The form
has a smooth, symmetric integrand, so a trapezoid rule is spectrally
accurate and ``phi`` keeps full relative precision for large ``x``.
The numba kernels only use ``log(-log(1 - phi))`` on a dense uniform grid
in ``log x``; ``phi`` and ``1 - phi`` are both recovered from it without
cancellation.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numba
import numpy as np
from scipy.interpolate import CubicSpline

H1 = 0.3073
H2 = 0.8935
H3 = 1.1064

#: LLR means are clamped here; J(MEAN_CAP) == 1.0 in double precision.
MEAN_CAP = 1.0e3

_X_MIN = 1.0e-10
_X_MAX = 2.0e3
_SERIES_X = 1.0e-4
_N_COARSE = 1500
_N_FINE = 1 << 16


# --------------------------------------------------------------------------
# J and its inverse
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def j_scalar(mu):
    if mu <= 0.0:
        return 0.0
    return (1.0 - 2.0 ** (-H1 * (2.0 * mu) ** H2)) ** H3


@numba.njit(cache=True)
def j_inv_scalar(mi):
    if mi <= 0.0:
        return 0.0
    if mi >= 1.0:
        return MEAN_CAP
    inner = 1.0 - mi ** (1.0 / H3)
    if inner <= 0.0:
        return MEAN_CAP
    mu = 0.5 * (-math.log2(inner) / H1) ** (1.0 / H2)
    return min(mu, MEAN_CAP)


def j_fun(mu):
    """Mutual information of a consistent Gaussian LLR with mean ``mu``."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mean must be nonnegative")
    out = (1.0 - np.exp2(-H1 * (2.0 * mu) ** H2)) ** H3
    return out[()] if out.ndim == 0 else out


def j_inv(mi):
    """Closed-form inverse of :func:`j_fun`; ``j_inv(1)`` returns ``MEAN_CAP``."""
    mi = np.asarray(mi, dtype=float)
    if np.any((mi < 0) | (mi > 1)):
        raise ValueError("mutual information must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        inner = 1.0 - mi ** (1.0 / H3)
        mu = 0.5 * (-np.log2(inner) / H1) ** (1.0 / H2)
    mu = np.where(mi <= 0, 0.0, np.minimum(mu, MEAN_CAP))
    return mu[()] if mu.ndim == 0 else mu


# --------------------------------------------------------------------------
# phi
# --------------------------------------------------------------------------

def phi_quadrature(x: float) -> float:
    """Reference evaluation of phi(x) by trapezoid quadrature (x > 0)."""
    s = math.sqrt(2.0 * x)
    half_width = min(90.0, 14.0 * s)
    step = min(0.05, s / 25.0)
    n = int(math.ceil(half_width / step))
    v = np.linspace(-half_width, half_width, 2 * n + 1)
    integrand = np.exp(-v * v / (4.0 * x)) / np.cosh(0.5 * v)
    integral = np.trapezoid(integrand, v)
    return math.exp(-0.25 * x) / math.sqrt(4.0 * math.pi * x) * integral


def _log_one_minus_phi(x: float) -> float:
    if x < _SERIES_X:
        # E[tanh(u/2)], u ~ N(x, 2x), expanded around x = 0
        return math.log(0.5 * x - 0.25 * x * x + 5.0 * x ** 3 / 24.0)
    return math.log1p(-phi_quadrature(x))


@lru_cache(maxsize=1)
def phi_table() -> tuple[np.ndarray, np.ndarray]:
    """Dense table ``(log x, log(-log(1 - phi(x))))`` on a uniform ``log x`` grid.

    Built from a coarse exact quadrature and resampled with a cubic spline.
    """
    lx_coarse = np.linspace(math.log(_X_MIN), math.log(_X_MAX), _N_COARSE)
    w_coarse = np.array([math.log(-_log_one_minus_phi(math.exp(a))) for a in lx_coarse])
    spline = CubicSpline(lx_coarse, w_coarse)
    lx = np.linspace(lx_coarse[0], lx_coarse[-1], _N_FINE)
    w = spline(lx)
    # w must be strictly decreasing for the inverse search
    if not np.all(np.diff(w) < 0):
        raise RuntimeError("phi table is not monotone")
    return lx, w


@numba.njit(cache=True)
def log_one_minus_phi(x, lx, w):
    """log(1 - phi(x)) from the dense table; -inf at x = 0."""
    if x <= 0.0:
        return -np.inf
    a = math.log(x)
    n = lx.shape[0]
    if a <= lx[0]:
        return math.log(0.5 * x - 0.25 * x * x)
    if a >= lx[n - 1]:
        # asymptote phi ~ sqrt(pi/x) exp(-x/4)
        return -math.sqrt(math.pi / x) * math.exp(-0.25 * x)
    h = (lx[n - 1] - lx[0]) / (n - 1)
    pos = (a - lx[0]) / h
    i = int(pos)
    if i >= n - 1:
        i = n - 2
    t = pos - i
    return -math.exp(w[i] + t * (w[i + 1] - w[i]))


@numba.njit(cache=True)
def phi_inv_from_log(log_p, lx, w):
    """Inverse map: the x with log(1 - phi(x)) == log_p (log_p <= 0)."""
    if log_p >= 0.0:
        return MEAN_CAP
    if log_p == -np.inf:
        return 0.0
    target = math.log(-log_p)
    n = w.shape[0]
    if target >= w[0]:
        # below the table: 1 - phi(x) ~ x/2
        return 2.0 * math.exp(log_p)
    if target <= w[n - 1]:
        return MEAN_CAP
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if w[mid] > target:
            lo = mid
        else:
            hi = mid
    t = (target - w[lo]) / (w[hi] - w[lo])
    x = math.exp(lx[lo] + t * (lx[hi] - lx[lo]))
    return min(x, MEAN_CAP)


@numba.njit(cache=True)
def _phi_many(x, lx, w):
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        if x[k] <= 0.0:
            out[k] = 1.0
        else:
            out[k] = -math.expm1(log_one_minus_phi(x[k], lx, w))
    return out


@numba.njit(cache=True)
def _phi_inv_many(y, lx, w):
    out = np.empty(y.shape[0])
    for k in range(y.shape[0]):
        out[k] = phi_inv_from_log(math.log1p(-y[k]), lx, w) if y[k] < 1.0 else 0.0
    return out


def phi_fun(x):
    """phi(x) with phi(0) = 1, strictly decreasing on (0, inf)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("phi is defined for x >= 0")
    lx, w = phi_table()
    out = _phi_many(np.atleast_1d(x).ravel(), lx, w).reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def phi_inv(y):
    """Inverse of :func:`phi_fun` for ``y`` in (0, 1]."""
    y = np.asarray(y, dtype=float)
    if np.any((y <= 0) | (y > 1)):
        raise ValueError("phi_inv is defined on (0, 1]")
    lx, w = phi_table()
    out = _phi_inv_many(np.atleast_1d(y).ravel(), lx, w).reshape(y.shape)
    return out[()] if out.ndim == 0 else out


def q_function(x):
    """Gaussian tail probability."""
    from scipy.special import erfc

    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
