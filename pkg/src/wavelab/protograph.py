"""Protograph base matrices and their coupled (tail-biting / terminated) chains."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

MODES = ("tail_biting", "terminated", "uncoupled")


class ProtographError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BaseMatrix:
    """Nonnegative integer protograph matrix; entry (j, i) counts the parallel
    edges between check type j and variable type i."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.entries)
        if arr.ndim != 2 or arr.size == 0:
            raise ProtographError("base matrix must be a non-empty 2-D array")
        if np.any(arr < 0):
            raise ProtographError("base matrix entries must be nonnegative")
        if np.any(arr.sum(axis=1) == 0) or np.any(arr.sum(axis=0) == 0):
            raise ProtographError("every row and column needs a nonzero entry")
        object.__setattr__(self, "entries", arr)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def column_weights(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    @property
    def row_weights(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def __eq__(self, other):
        return isinstance(other, BaseMatrix) and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"BaseMatrix({self.entries.tolist()})"


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Components ``B_0 .. B_{W-1}`` (each M' x N') plus chain length and mode."""

    components: tuple
    L: int = 50
    mode: str = "tail_biting"
    name: str = ""

    def __post_init__(self):
        comps = tuple(_frozen(c) for c in self.components)
        if not comps:
            raise ProtographError("need at least one component")
        shape = comps[0].shape
        if any(c.shape != shape for c in comps):
            raise ProtographError("all components must share the same M' x N' shape")
        if any(np.any(c < 0) for c in comps):
            raise ProtographError("component entries must be nonnegative")
        if self.mode not in MODES:
            raise ProtographError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.L < len(comps):
            raise ProtographError(f"L={self.L} must be at least W={len(comps)}")
        object.__setattr__(self, "components", comps)
        # the summed matrix must itself be a valid protograph
        BaseMatrix(self.uncoupled_matrix)

    @property
    def W(self) -> int:
        return len(self.components)

    @property
    def m_prime(self) -> int:
        return self.components[0].shape[0]

    @property
    def n_prime(self) -> int:
        return self.components[0].shape[1]

    @property
    def uncoupled_matrix(self) -> np.ndarray:
        return np.sum(self.components, axis=0)

    def with_mode(self, mode: str, L: int | None = None) -> "CouplingSpec":
        return replace(self, mode=mode, L=self.L if L is None else L)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "components": [c.tolist() for c in self.components],
            "L": self.L,
            "W": self.W,
            "mode": self.mode,
        }


@dataclass(frozen=True, eq=False)
class CoupledEnsemble:
    base: BaseMatrix
    spec: CouplingSpec
    rate: Fraction = field(default=Fraction(0))

    @property
    def n_positions(self) -> int:
        """Number of sub-blocks (spatial positions) in the chain."""
        return 1 if self.spec.mode == "uncoupled" else self.spec.L

    @property
    def n_prime(self) -> int:
        return self.spec.n_prime

    @property
    def reference_rate(self) -> Fraction:
        """Rate used for Eb/N0 bookkeeping; termination loss is not charged."""
        return Fraction(self.spec.n_prime - self.spec.m_prime, self.spec.n_prime)

    @property
    def name(self) -> str:
        return self.spec.name


def build_coupled(spec: CouplingSpec) -> CoupledEnsemble:
    """Assemble the chain matrix for ``spec``.

    Component ``B_i`` of block-column ``j`` goes to block-row ``j + i``;
    tail-biting wraps that index mod ``L``.  Uncoupled mode returns the
    summed ``M' x N'`` matrix (one sub-block).
    """
    mp, np_ = spec.m_prime, spec.n_prime
    L, W = spec.L, spec.W
    if spec.mode == "uncoupled":
        mat = spec.uncoupled_matrix
    else:
        n_rows = L if spec.mode == "tail_biting" else L + W - 1
        mat = np.zeros((n_rows * mp, L * np_), dtype=np.int64)
        for j in range(L):
            for i, comp in enumerate(spec.components):
                r = (j + i) % L if spec.mode == "tail_biting" else j + i
                mat[r * mp:(r + 1) * mp, j * np_:(j + 1) * np_] += comp
    ens = CoupledEnsemble(BaseMatrix(mat), spec)
    object.__setattr__(ens, "rate", design_rate(ens))
    return ens


def design_rate(ensemble: CoupledEnsemble) -> Fraction:
    spec = ensemble.spec
    ratio = Fraction(spec.m_prime, spec.n_prime)
    if spec.mode == "terminated":
        return 1 - Fraction(spec.L + spec.W - 1, spec.L) * ratio
    return 1 - ratio


def split_uniform(matrix, W: int) -> tuple:
    """Split ``matrix`` into ``W`` equal components (entries must divide evenly)."""
    arr = np.asarray(matrix, dtype=np.int64)
    if np.any(arr % W):
        raise ProtographError(f"entries of {arr.tolist()} are not divisible by W={W}")
    return tuple([arr // W] * W)


def standard_codes(L: int = 50) -> dict[str, CouplingSpec]:
    """The four ensembles C1..C4 (tail-biting mode by default)."""
    return {
        "C1": CouplingSpec(split_uniform([[3, 3]], 3), L=L, name="C1"),
        "C2": CouplingSpec(split_uniform([[4, 4]], 4), L=L, name="C2"),
        "C3": CouplingSpec(([[2, 2, 2, 2]], [[2, 2, 2, 2]]), L=L, name="C3"),
        "C4": CouplingSpec(([[1, 2, 1, 2]], [[3, 2, 3, 2]]), L=L, name="C4"),
    }


def spec_from_dict(d: dict) -> CouplingSpec:
    comps = d["components"]
    if "W" in d and d["W"] != len(comps):
        raise ProtographError(f"W={d['W']} does not match {len(comps)} components")
    return CouplingSpec(tuple(comps), L=int(d.get("L", 50)), mode=d.get("mode", "tail_biting"),
                        name=d.get("name", ""))


def load_codes(path) -> dict[str, CouplingSpec]:
    """Read code definitions from JSON (one object or a list of objects)."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    specs = [spec_from_dict(d) for d in data]
    return {s.name: s for s in specs}


def get_code(name: str, mode: str = "tail_biting", L: int | None = None,
             extra: dict[str, CouplingSpec] | None = None) -> CouplingSpec:
    codes = dict(standard_codes())
    if extra:
        codes.update(extra)
    if name not in codes:
        raise KeyError(f"unknown code {name!r}; known: {sorted(codes)}")
    return codes[name].with_mode(mode, L)
