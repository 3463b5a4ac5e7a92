"""Decoding thresholds of tail-biting spatially coupled LDPC ensembles with
16-QAM and iterative demapping, and optimization of the bit mapping that
seeds a decoding wave."""

__version__ = "0.1.0"

from .protograph import BaseMatrix, CouplingSpec, CoupledEnsemble, build_coupled, get_code  # noqa: E402
from .demapper import CurveCache, make_constellation, simulate_demapper_curves  # noqa: E402
from .mapping import MappingMatrix, RelaxedMapping, seeded_mapping, uniform_mapping, validate  # noqa: E402
from .ga_de import bec_de, find_threshold_db, run_de  # noqa: E402

__all__ = [
    "BaseMatrix", "CouplingSpec", "CoupledEnsemble", "build_coupled", "get_code",
    "CurveCache", "make_constellation", "simulate_demapper_curves",
    "MappingMatrix", "RelaxedMapping", "seeded_mapping", "uniform_mapping", "validate",
    "bec_de", "find_threshold_db", "run_de",
]
