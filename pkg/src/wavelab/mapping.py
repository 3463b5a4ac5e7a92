"""Bit-mapping matrix D: fractions of each position's bits per bit channel.

Rows ``0..K-1`` are the Gray bit channels, rows ``K..2K-1`` the SP ones.
Columns are (sub-block, variable type) pairs, sub-block major, matching the
column order of the coupled base matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

QUANTUM = 1e-6
TOL = 1e-9


class MappingError(ValueError):
    pass


def quantize(a) -> np.ndarray:
    return np.round(np.asarray(a, dtype=float) / QUANTUM) * QUANTUM


@dataclass(frozen=True, eq=False)
class MappingMatrix:
    K: int
    L: int
    N_prime: int
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.shape != (2 * self.K, self.L * self.N_prime):
            raise MappingError(f"D must be {2 * self.K} x {self.L * self.N_prime}, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def block(self, j: int) -> np.ndarray:
        """Columns belonging to sub-block ``j`` (0-based)."""
        return self.d[:, j * self.N_prime:(j + 1) * self.N_prime]

    @property
    def labeling_assignment(self) -> list[str]:
        return hybrid_assignment(self)

    def permuted_blocks(self, order) -> "MappingMatrix":
        cols = np.concatenate([np.arange(j * self.N_prime, (j + 1) * self.N_prime) for j in order])
        return MappingMatrix(self.K, self.L, self.N_prime, self.d[:, cols])


@dataclass(frozen=True, eq=False)
class RelaxedMapping:
    """Two column vectors: one for the first ``T_uni`` sub-blocks, one for the rest."""

    T_uni: int
    vec_seed: np.ndarray
    vec_rest: np.ndarray

    def __post_init__(self):
        for name in ("vec_seed", "vec_rest"):
            v = np.array(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.vec_seed.shape != self.vec_rest.shape or self.vec_seed.ndim != 1:
            raise MappingError("vec_seed and vec_rest must be 1-D of equal length")

    def to_dict(self, K: int, L: int, N_prime: int) -> dict:
        return {"K": K, "L": L, "N_prime": N_prime, "T_uni": int(self.T_uni),
                "vec_seed": self.vec_seed.tolist(), "vec_rest": self.vec_rest.tolist()}


@dataclass
class ValidationReport:
    column_sum: float
    gray_balance: float
    sp_balance: float
    range_violation: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = max(self.column_sum, self.gray_balance, self.sp_balance,
                          self.range_violation) < TOL


def family_rows(K: int, family: str) -> slice:
    return slice(0, K) if family == "gray" else slice(K, 2 * K)


def uniform_mapping(K: int, L: int, N_prime: int, labeling: str) -> MappingMatrix:
    if labeling not in ("gray", "sp"):
        raise MappingError(f"unknown labeling {labeling!r}")
    d = np.zeros((2 * K, L * N_prime))
    d[family_rows(K, labeling)] = 1.0 / K
    return MappingMatrix(K, L, N_prime, d)


def balance_rest(vec_seed, vec_rest, K: int, L: int, T: int) -> np.ndarray:
    """Closed-form correction of ``vec_rest`` so every family's channels carry
    equal totals.

    Each family keeps the mass it has over the whole chain; inside a family
    the rest vector is set so ``T*seed[l] + (L-T)*rest[l]`` is the same for
    every channel ``l``.  Raises if that needs a negative fraction.
    """
    seed = np.asarray(vec_seed, dtype=float)
    rest = np.asarray(vec_rest, dtype=float)
    if T >= L:
        return rest.copy()
    out = np.empty_like(rest)
    for fam in ("gray", "sp"):
        rows = family_rows(K, fam)
        total = T * seed[rows].sum() + (L - T) * rest[rows].sum()
        out[rows] = (total / K - T * seed[rows]) / (L - T)
    if np.any(out < -TOL):
        raise MappingError("seeded vector cannot be balanced: a rest fraction would be negative")
    return np.clip(out, 0.0, None)


def seeded_mapping(relaxed: RelaxedMapping, K: int, L: int, N_prime: int,
                   balance: bool = True) -> MappingMatrix:
    """Expand a two-vector mapping to the full matrix (seeded blocks first)."""
    T = int(relaxed.T_uni)
    if not 0 <= T <= L:
        raise MappingError(f"T_uni={T} outside [0, {L}]")
    if relaxed.vec_seed.size != 2 * K:
        raise MappingError(f"vectors must have length {2 * K}")
    for v in (relaxed.vec_seed, relaxed.vec_rest):
        if np.any(v < -TOL) or abs(v.sum() - 1.0) > 1e-6:
            raise MappingError("mapping vectors must be nonnegative and sum to 1")
    seed = relaxed.vec_seed
    rest = balance_rest(seed, relaxed.vec_rest, K, L, T) if balance else relaxed.vec_rest
    cols = [seed] * (T * N_prime) + [rest] * ((L - T) * N_prime)
    return MappingMatrix(K, L, N_prime, np.array(cols).T)


def validate(m: MappingMatrix) -> ValidationReport:
    d = m.d
    col = float(np.max(np.abs(d.sum(axis=0) - 1.0)))

    def spread(rows):
        sums = d[rows].sum(axis=1)
        return float(sums.max() - sums.min())

    rng = float(max(0.0, -d.min(), d.max() - 1.0))
    return ValidationReport(col, spread(family_rows(m.K, "gray")),
                            spread(family_rows(m.K, "sp")), rng)


def hybrid_assignment(m: MappingMatrix) -> list[str]:
    """Per sub-block: 'gray', 'sp' or 'mixed' by which family carries mass."""
    out = []
    for j in range(m.L):
        blk = m.block(j)
        g = blk[family_rows(m.K, "gray")].sum() > TOL
        s = blk[family_rows(m.K, "sp")].sum() > TOL
        out.append("mixed" if g and s else ("sp" if s else "gray"))
    return out


def sp_block_count(m: MappingMatrix) -> int:
    """Sub-blocks that need SP (iterative) demapping."""
    return sum(a != "gray" for a in hybrid_assignment(m))


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------

def load_mapping(path) -> MappingMatrix:
    """Read a relaxed JSON mapping or a full-matrix CSV (2K rows)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        d = json.loads(path.read_text())
        relaxed = RelaxedMapping(d["T_uni"], d["vec_seed"], d["vec_rest"])
        return seeded_mapping(relaxed, d["K"], d["L"], d["N_prime"], balance=False)
    d = np.loadtxt(path, delimiter=",", ndmin=2)
    K = d.shape[0] // 2
    return MappingMatrix(K, d.shape[1], 1, d)


def save_mapping_csv(m: MappingMatrix, path) -> None:
    np.savetxt(path, m.d, delimiter=",", fmt="%.17g")
