"""Differential-evolution search over two-vector mappings of tail-biting chains.

A candidate is a pair (seed vector, rest vector) over the 2K bit channels.
The scheme fixes which channels each vector may use:

* ``gray``   -- Gray channels everywhere;
* ``sp``     -- SP channels everywhere;
* ``hybrid`` -- SP (and Gray) in the ``T`` seeded sub-blocks, Gray only in
  the rest.  Gray channels are demapped without feedback in this scheme.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .demapper import K
from .ga_de import MAX_ITER, BracketError, ebn0_to_esn0, curves_at, find_threshold_db, run_de, used_families
from .mapping import (MappingError, MappingMatrix, RelaxedMapping, family_rows, hybrid_assignment,
                      quantize, seeded_mapping, uniform_mapping, validate)
from .protograph import CoupledEnsemble

SCHEMES = ("gray", "sp", "hybrid")


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 32
    generations: int = 150
    F: float = 0.7
    CR: float = 0.9
    seed: int = 0
    threshold_tol_db: float = 0.05
    final_tol_db: float = 0.01
    bracket: tuple = (0.0, 8.0)
    max_iter: int = MAX_ITER
    workers: int = 1

    def __post_init__(self):
        if self.population < 8:
            raise ValueError("population must be at least 8")
        if not 0.0 < self.F < 2.0:
            raise ValueError("F must lie in (0, 2)")
        if not 0.0 <= self.CR <= 1.0:
            raise ValueError("CR must lie in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")


def _masks(scheme: str) -> tuple[np.ndarray, np.ndarray]:
    g = np.r_[np.ones(K, bool), np.zeros(K, bool)]
    s = ~g
    if scheme == "gray":
        return g, g
    if scheme == "sp":
        return s, s
    if scheme == "hybrid":
        return g | s, g
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def non_iterative_families(scheme: str) -> tuple[str, ...]:
    return ("gray",) if scheme == "hybrid" else ()


def _normalize(v: np.ndarray, mask: np.ndarray) -> np.ndarray:
    v = np.where(mask, np.clip(v, 0.0, 1.0), 0.0)
    tot = v.sum()
    if tot <= 0:
        v = mask.astype(float)
        tot = v.sum()
    return v / tot


def project(seed, rest, scheme: str, L: int, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Map an arbitrary vector pair onto a feasible balanced pair.

    Clip and renormalize both vectors over the scheme's channels, equalize a
    family that only appears in the seed, then shrink each seed family toward
    its own mean until the closed-form rest vector is nonnegative.
    """
    smask, rmask = _masks(scheme)
    seed = _normalize(np.asarray(seed, float), smask)
    rest = _normalize(np.asarray(rest, float), rmask)
    if T >= L:
        for fam in ("gray", "sp"):
            rows = family_rows(K, fam)
            seed[rows] = seed[rows].mean()
        return seed / seed.sum(), rest
    out_rest = np.zeros(2 * K)
    for fam in ("gray", "sp"):
        rows = family_rows(K, fam)
        s_mass = seed[rows].sum()
        total = T * s_mass + (L - T) * rest[rows].sum()
        if total <= 0:
            continue
        mean = s_mass / K
        if not rmask[rows].any():
            seed[rows] = mean
            continue
        dev = seed[rows] - mean
        # largest t in [0, 1] keeping total/K - T*(mean + t*dev) >= 0
        slack = total / K - T * mean
        pos = dev > 1e-15
        t = 1.0 if T == 0 or not pos.any() else min(1.0, float(np.min(slack / (T * dev[pos]))))
        seed[rows] = mean + max(t, 0.0) * dev
        out_rest[rows] = np.clip((total / K - T * seed[rows]) / (L - T), 0.0, None)
    return seed, out_rest / out_rest.sum()


def expand(candidate: RelaxedMapping, ensemble: CoupledEnsemble) -> MappingMatrix:
    return seeded_mapping(candidate, K, ensemble.n_positions, ensemble.n_prime, balance=False)


def fitness(candidate: RelaxedMapping, ensemble: CoupledEnsemble, scheme: str, curve_cache: dict,
            tol_db: float = 0.05, bracket=(0.0, 8.0), give_up_above: float | None = None,
            max_iter: int = MAX_ITER) -> float:
    """DE threshold (Eb/N0 dB) of the tail-biting chain under the expanded
    mapping; ``inf`` for infeasible candidates or when it cannot beat
    ``give_up_above``."""
    try:
        m = expand(candidate, ensemble)
    except MappingError:
        return math.inf
    if not validate(m).passed:
        return math.inf
    try:
        return find_threshold_db(ensemble, m, curve_cache, bracket, tol_db,
                                 non_iterative=non_iterative_families(scheme),
                                 give_up_above=give_up_above, max_iter=max_iter)
    except BracketError as err:
        if err.lo_ok:
            return bracket[0]
        return math.inf


def _initial(scheme: str, rng: np.random.Generator, n: int, curves_hint=None):
    smask, rmask = _masks(scheme)
    pop = []
    pop.append((smask / smask.sum(), rmask / rmask.sum()))
    if curves_hint is not None:
        best = np.zeros(2 * K)
        ranked = np.argsort(-np.where(smask, curves_hint, -np.inf))
        best[ranked[0]] = 1.0
        pop.append((best, rmask / rmask.sum()))
    while len(pop) < n:
        pop.append((rng.dirichlet(np.ones(2 * K)) * smask, rng.dirichlet(np.ones(2 * K)) * rmask))
    return pop[:n]


def _best_channel_hint(curve_cache: dict, snr_db: float) -> np.ndarray:
    """Per-channel extrinsic MI at full a-priori, used to seed one individual."""
    hint = np.zeros(2 * K)
    for fam, off in (("gray", 0), ("sp", K)):
        if fam in curve_cache:
            hint[off:off + K] = curve_cache[fam].at(snr_db).per_bit[:, -1]
    return hint


@dataclass
class OptimizeResult:
    mapping: RelaxedMapping
    threshold_db: float
    evaluations: int
    history: list = field(default_factory=list)
    population: list = field(default_factory=list)
    fitnesses: list = field(default_factory=list)


class _Evaluator:
    """Picklable fitness closure so a process pool can run it."""

    def __init__(self, ensemble, scheme, curve_cache, config, T):
        self.args = (ensemble, scheme, curve_cache, config, T)

    def __call__(self, job):
        pair, cap = job
        ensemble, scheme, curve_cache, config, T = self.args
        L = ensemble.n_positions
        cand = _requantize(RelaxedMapping(T, quantize(pair[0]), quantize(pair[1])), scheme, L, T)
        return fitness(cand, ensemble, scheme, curve_cache, config.threshold_tol_db,
                       config.bracket, cap, config.max_iter)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, jobs))


def optimize_for_T(ensemble: CoupledEnsemble, scheme: str, T: int, config: OptimizerConfig,
                   curve_cache: dict, warm_start: OptimizeResult | None = None) -> OptimizeResult:
    """DE/rand/1/bin over (seed, rest) with projection after every mutation.

    Each generation builds all trials from the current population, evaluates
    them (in parallel when ``config.workers > 1``), then selects. Every
    individual draws from its own RNG substream, so results do not depend on
    evaluation order.
    """
    L = ensemble.n_positions
    if not 0 <= T <= L:
        raise ValueError(f"T={T} outside [0, {L}]")
    tag = SCHEMES.index(scheme)
    evaluate = _Evaluator(ensemble, scheme, curve_cache, config, T)
    if warm_start is not None and warm_start.population:
        pop = [tuple(np.array(v) for v in p) for p in warm_start.population]
        fit = list(warm_start.fitnesses)
        history = list(warm_start.history)
        gen0 = len(history) - 1
        evals = warm_start.evaluations
    else:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, tag, T]))
        rate = float(ensemble.reference_rate)
        hint = _best_channel_hint(curve_cache, ebn0_to_esn0(0.5 * sum(config.bracket), rate))
        n_init = 1 if T == 0 else config.population
        pop = [project(s, r, scheme, L, T) for s, r in _initial(scheme, rng, n_init, hint)]
        fit = _map(evaluate, [(p, None) for p in pop], config.workers)
        history = [min(fit)]
        gen0 = 0
        evals = len(pop)
    n = len(pop)
    if T > 0 and n >= 4:
        for gen in range(gen0, gen0 + config.generations):
            trials = []
            for i in range(n):
                rng = np.random.default_rng(np.random.SeedSequence([config.seed, tag, T, gen + 1, i]))
                r1, r2, r3 = rng.choice([k for k in range(n) if k != i], 3, replace=False)
                x = np.concatenate(pop[i])
                mutant = np.concatenate(pop[r1]) + config.F * (np.concatenate(pop[r2]) - np.concatenate(pop[r3]))
                cross = rng.random(x.size) < config.CR
                cross[rng.integers(x.size)] = True
                trial = np.where(cross, mutant, x)
                trials.append(project(trial[:2 * K], trial[2 * K:], scheme, L, T))
            caps = [f if math.isfinite(f) else None for f in fit]
            scores = _map(evaluate, list(zip(trials, caps)), config.workers)
            evals += n
            for i, f in enumerate(scores):
                if f <= fit[i]:
                    pop[i], fit[i] = trials[i], f
            history.append(min(fit))
    best = int(np.argmin(fit))
    cand = _requantize(RelaxedMapping(T, quantize(pop[best][0]), quantize(pop[best][1])), scheme, L, T)
    final = fitness(cand, ensemble, scheme, curve_cache, config.final_tol_db, config.bracket,
                    None, config.max_iter)
    return OptimizeResult(cand, final, evals + 1, history, pop, fit)


def _requantize(cand: RelaxedMapping, scheme: str, L: int, T: int) -> RelaxedMapping:
    """Quantization can break the exact balance; re-project and absorb the
    rounding residue into the largest entry of each vector."""
    seed, rest = project(cand.vec_seed, cand.vec_rest, scheme, L, T)
    out = []
    for v in (seed, rest):
        v = quantize(v)
        v[np.argmax(v)] += 1.0 - v.sum()
        out.append(v)
    seed, rest = out
    if 0 < T < L:
        # recompute rest exactly from the quantized seed so family totals match
        for fam in ("gray", "sp"):
            rows = family_rows(K, fam)
            total = T * seed[rows].sum() + (L - T) * rest[rows].sum()
            rest[rows] = (total / K - T * seed[rows]) / (L - T)
        rest = np.clip(rest, 0.0, None)
    return RelaxedMapping(T, seed, rest)


@dataclass
class SweepEntry:
    scheme: str
    T: int
    threshold_db: float
    mapping: RelaxedMapping
    evaluations: int


@dataclass
class SweepResult:
    entries: dict = field(default_factory=dict)

    def threshold(self, scheme: str, T: int) -> float:
        return self.entries[(scheme, T)].threshold_db

    def curve(self, scheme: str) -> list[tuple[int, float]]:
        return sorted((T, e.threshold_db) for (s, T), e in self.entries.items() if s == scheme)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scheme", "T", "threshold_db", "evaluations", "vec_seed", "vec_rest"])
            for (s, T), e in sorted(self.entries.items()):
                w.writerow([s, T, f"{e.threshold_db:.4f}", e.evaluations,
                            " ".join(f"{x:.6f}" for x in e.mapping.vec_seed),
                            " ".join(f"{x:.6f}" for x in e.mapping.vec_rest)])


def sweep_T(ensemble: CoupledEnsemble, schemes, T_range, config: OptimizerConfig,
            curve_cache: dict, progress=None) -> SweepResult:
    result = SweepResult()
    for scheme in schemes:
        for T in T_range:
            r = optimize_for_T(ensemble, scheme, T, config, curve_cache)
            result.entries[(scheme, T)] = SweepEntry(scheme, T, r.threshold_db, r.mapping, r.evaluations)
            if progress is not None:
                progress(scheme, T, r.threshold_db)
    return result


def wave_trigger_T(curve: list[tuple[int, float]], target_db: float):
    """Smallest T whose threshold is at or below ``target_db``; None if none is."""
    for T, th in sorted(curve):
        if th <= target_db:
            return T
    return None


@dataclass
class CostSummary:
    sp_fraction: float
    sp_blocks: int
    iterations: int
    snr_db: float


def demapping_cost(mapping: MappingMatrix, ensemble: CoupledEnsemble, curve_cache: dict,
                   threshold_db: float, scheme: str = "sp", margin_db: float = 0.1) -> CostSummary:
    """Share of sub-blocks needing SP (iterative) demapping, and the DE
    iteration count ``margin_db`` above the threshold."""
    assign = hybrid_assignment(mapping)
    sp_blocks = sum(a != "gray" for a in assign)
    snr = threshold_db + margin_db
    es = ebn0_to_esn0(snr, float(ensemble.reference_rate), mapping.K)
    curves = curves_at(curve_cache, es, used_families(mapping), non_iterative_families(scheme))
    res = run_de(ensemble, mapping, curves, record=False)
    return CostSummary(sp_blocks / mapping.L, sp_blocks, res.iterations_used, snr)


def uniform_candidate(scheme: str) -> RelaxedMapping:
    smask, rmask = _masks(scheme)
    return RelaxedMapping(0, smask / smask.sum(), rmask / rmask.sum())
