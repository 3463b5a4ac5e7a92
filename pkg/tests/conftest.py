import math
import os
from pathlib import Path

import numpy as np
import pytest

from wavelab.demapper import CurveCache, DemapperCurveSet
from wavelab.functions import j_fun

REPO = Path(__file__).resolve().parents[1]


class BpskCache:
    """Curve cache stand-in for BPSK: flat curves at the binary-input AWGN MI.

    ``at`` receives the Es/N0 the threshold search computed for ``K`` bits per
    symbol and maps it back to the BPSK LLR mean ``4 R Eb/N0``.
    """

    def __init__(self, rate: float, K: int = 4):
        self.rate, self.K = rate, K

    def at(self, es):
        eb = es - 10 * math.log10(self.K * self.rate)
        c = float(j_fun(4 * self.rate * 10 ** (eb / 10)))
        return DemapperCurveSet(es, "bpsk", np.linspace(0, 1, 21), np.full((4, 21), c))


@pytest.fixture
def bpsk_cache():
    return BpskCache


def curve_settings():
    """Cache directory and Monte Carlo size shared by the heavy tests."""
    cache_dir = os.environ.get("WAVELAB_CACHE_DIR") or str(REPO / ".curve_cache")
    n_symbols = int(os.environ.get("WAVELAB_TEST_SYMBOLS", "200000"))
    return cache_dir, n_symbols


@pytest.fixture(scope="session")
def real_caches():
    cache_dir, n = curve_settings()
    return {lab: CurveCache(lab, n_symbols=n, cache_dir=cache_dir) for lab in ("gray", "sp")}
