"""``wavelab`` command line.

Exit codes: 0 success, 2 usage or validation failure, 1 runtime error.
Every file written gets a ``<file>.manifest.json`` sidecar; JSON outputs also
embed the manifest under the ``manifest`` key.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .demapper import LABELINGS, CurveCache, default_cache_dir, make_constellation, \
    simulate_demapper_curves, write_curves_csv
from .exit import DegreeProfile, bp_threshold_exit, cnd_inverse, map_threshold_area, vnd_demap_exit
from .ga_de import BracketError, bec_de, ebn0_to_esn0, find_threshold_db, run_de, curves_at, used_families
from .mapping import MappingError, load_mapping, uniform_mapping, validate
from .optimizer import SCHEMES, OptimizerConfig, optimize_for_T, sweep_T
from .protograph import CouplingSpec, build_coupled, get_code, load_codes

DEFAULT_N_SYMBOLS = 200_000

MODE_ALIASES = {"tailbiting": "tail_biting", "tail-biting": "tail_biting", "tail_biting": "tail_biting",
                "terminated": "terminated", "uncoupled": "uncoupled"}

# Reference thresholds, Eb/N0 in dB: (code, labeling, regime, method) -> value.
# regime "uncoupled" uses the block ensemble; "coupled" uses the EXIT area
# construction or DE of the terminated chain (no rate-loss charge).
REFERENCE_THRESHOLDS = {
    ("C1", "gray", "uncoupled", "exit"): 3.412, ("C1", "sp", "uncoupled", "exit"): 4.705,
    ("C1", "gray", "uncoupled", "de"): 3.412, ("C1", "sp", "uncoupled", "de"): 4.741,
    ("C1", "gray", "coupled", "exit"): 2.582, ("C1", "sp", "coupled", "exit"): 2.189,
    ("C1", "gray", "coupled", "de"): 2.545, ("C1", "sp", "coupled", "de"): 2.138,
    ("C2", "gray", "uncoupled", "exit"): 4.000, ("C2", "sp", "uncoupled", "exit"): 5.667,
    ("C2", "gray", "uncoupled", "de"): 4.005, ("C2", "sp", "uncoupled", "de"): 5.702,
    ("C2", "gray", "coupled", "exit"): 2.352, ("C2", "sp", "coupled", "exit"): 2.108,
    ("C2", "gray", "coupled", "de"): 2.279, ("C2", "sp", "coupled", "de"): 2.054,
    ("C3", "gray", "uncoupled", "exit"): 5.460, ("C3", "sp", "uncoupled", "exit"): 6.477,
    ("C3", "gray", "uncoupled", "de"): 5.471, ("C3", "sp", "uncoupled", "de"): 6.501,
    ("C3", "gray", "coupled", "exit"): 4.753, ("C3", "sp", "coupled", "exit"): 4.556,
    ("C3", "gray", "coupled", "de"): 4.770, ("C3", "sp", "coupled", "de"): 5.134,
    ("C4", "gray", "uncoupled", "exit"): 5.460, ("C4", "sp", "uncoupled", "exit"): 6.477,
    ("C4", "gray", "uncoupled", "de"): 5.471, ("C4", "sp", "uncoupled", "de"): 6.501,
    ("C4", "gray", "coupled", "exit"): 4.753, ("C4", "sp", "coupled", "exit"): 4.556,
    ("C4", "gray", "coupled", "de"): 4.753, ("C4", "sp", "coupled", "de"): 4.678,
}


class UsageError(Exception):
    """Bad arguments or invalid input files: exit code 2."""


@dataclass
class RunManifest:
    command_line: list
    seed: int | None = None
    code: str | None = None
    labeling: str | None = None
    tolerances: dict = field(default_factory=dict)
    version: str = __version__
    outputs: list = field(default_factory=list)
    created: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S"))

    def to_dict(self) -> dict:
        return asdict(self)


def _write_sidecar(path: Path, manifest: RunManifest) -> None:
    manifest.outputs = sorted(set(manifest.outputs) | {str(path)})
    Path(f"{path}.manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")


def write_csv(path, header, rows, manifest: RunManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    _write_sidecar(path, manifest)


def write_json(path, payload: dict, manifest: RunManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest.outputs = sorted(set(manifest.outputs) | {str(path)})
    path.write_text(json.dumps({**payload, "manifest": manifest.to_dict()}, indent=2) + "\n")
    _write_sidecar(path, manifest)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def parse_mode(text: str) -> str:
    try:
        return MODE_ALIASES[text.lower()]
    except KeyError:
        raise UsageError(f"unknown mode {text!r}; use tailbiting, terminated or uncoupled") from None


def parse_int_range(text: str) -> list[int]:
    """'0..14', '2,4,6' or a mix like '0..3,8'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty range {text!r}")
    return out


def parse_positions(text: str) -> list[int]:
    try:
        return parse_int_range(text)
    except ValueError:
        raise UsageError(f"bad position list {text!r}") from None


def read_config(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment; values parsed as JSON
    when possible, else kept as strings."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value.strip("'\"")
    return out


def code_spec(args, mode: str | None = None) -> CouplingSpec:
    extra = load_codes(args.codes_file) if getattr(args, "codes_file", None) else None
    mode = mode or parse_mode(getattr(args, "mode", "tailbiting"))
    try:
        return get_code(args.code, mode, getattr(args, "L", None), extra)
    except KeyError as err:
        raise UsageError(str(err.args[0])) from None


def curve_caches(args, families=LABELINGS) -> dict:
    return {fam: CurveCache(fam, n_symbols=args.n_symbols, seed=args.curve_seed,
                            cache_dir=args.cache_dir) for fam in families}


def fmt_db(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.3f}"


def code_rate(spec: CouplingSpec) -> float:
    return float(build_coupled(spec.with_mode("uncoupled")).reference_rate)


# --------------------------------------------------------------------------
# threshold cells
# --------------------------------------------------------------------------

def threshold_cell(code: str, labeling: str, regime: str, method: str, caches: dict,
                   tol_db: float = 0.01, bracket=(0.5, 9.0), L: int = 50) -> float:
    """One entry of the threshold table (Eb/N0 dB at the code's own rate)."""
    base = get_code(code, "uncoupled", L)
    rate = code_rate(base)
    if method == "exit":
        profile = DegreeProfile.from_base_matrix(base.uncoupled_matrix)
        fn = bp_threshold_exit if regime == "uncoupled" else map_threshold_area
        return fn(profile, caches[labeling], bracket, tol_db, rate=rate)
    mode = "uncoupled" if regime == "uncoupled" else "terminated"
    ens = build_coupled(get_code(code, mode, L))
    m = uniform_mapping(4, ens.n_positions, ens.n_prime, labeling)
    return find_threshold_db(ens, m, caches, bracket, tol_db, rate=rate)


def cell_tolerance(regime: str, method: str, base_tol: float) -> float:
    """Coupled DE cells carry an extra 0.05 dB for Monte Carlo and iteration-cap noise."""
    return base_tol + 0.05 if (regime, method) == ("coupled", "de") else base_tol


def table1_rows(caches: dict, tol_db: float = 0.1, search_tol_db: float = 0.01, progress=None):
    """Compute every reference cell; identical ensembles are computed once."""
    memo = {}
    rows = []
    for key, ref in REFERENCE_THRESHOLDS.items():
        code, lab, regime, method = key
        # C3 and C4 share the uncoupled matrix and the degree profile
        shared = code == "C4" and (regime == "uncoupled" or method == "exit")
        mkey = ("C3" if shared else code, lab, regime, method)
        if mkey not in memo:
            memo[mkey] = threshold_cell(*mkey, caches, search_tol_db)
        val = memo[mkey]
        tol = cell_tolerance(regime, method, tol_db)
        row = {"code": code, "labeling": lab, "regime": regime, "method": method,
               "reference_db": ref, "computed_db": val, "delta_db": val - ref,
               "tolerance_db": tol, "passed": abs(val - ref) <= tol}
        rows.append(row)
        if progress:
            progress(row)
    return rows


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_codes(args, manifest):
    extra = load_codes(args.codes_file) if args.codes_file else {}
    from .protograph import standard_codes
    codes = {**standard_codes(), **extra}
    if args.action == "list":
        for name, spec in codes.items():
            ens = build_coupled(spec)
            print(f"{name}: W={spec.W} M'={spec.m_prime} N'={spec.n_prime} "
                  f"R_tb={float(ens.reference_rate):.4f}")
        return 0
    if args.name not in codes:
        raise UsageError(f"unknown code {args.name!r}")
    spec = codes[args.name]
    if args.L is not None or args.mode:
        spec = spec.with_mode(parse_mode(args.mode or "tailbiting"), args.L)
    print(json.dumps(spec.to_dict()))
    if args.matrix:
        with np.printoptions(linewidth=200, threshold=100_000):
            print(np.asarray(build_coupled(spec).base.entries))
    return 0


def cmd_curves(args, manifest):
    if args.labeling not in LABELINGS:
        raise UsageError(f"labeling must be one of {LABELINGS}")
    grid = np.linspace(0.0, 1.0, args.grid_points)
    cs = simulate_demapper_curves(make_constellation(args.labeling), args.snr, grid,
                                  args.n_symbols, args.seed)
    manifest.seed, manifest.labeling = args.seed, args.labeling
    write_curves_csv([cs], args.out)
    _write_sidecar(Path(args.out), manifest)
    print(f"{args.labeling} @ {args.snr} dB Es/N0: I_E(0)={cs.average[0]:.4f} "
          f"I_E(1)={cs.average[-1]:.4f} -> {args.out}")
    return 0


def cmd_threshold(args, manifest):
    mode = parse_mode(args.mode)
    spec = code_spec(args, mode)
    ens = build_coupled(spec)
    if args.mapping:
        m = load_mapping(args.mapping)
        rep = validate(m)
        if not rep.passed:
            print(f"mapping invalid: {rep}", file=sys.stderr)
            return 2
    else:
        if args.labeling not in LABELINGS:
            raise UsageError(f"labeling must be one of {LABELINGS}")
        m = uniform_mapping(4, ens.n_positions, ens.n_prime, args.labeling)
    caches = curve_caches(args)
    rate = code_rate(spec)
    th = find_threshold_db(ens, m, caches, tuple(args.bracket), args.tol_db, rate=rate,
                           max_iter=args.max_iter)
    manifest.code, manifest.labeling = spec.name, args.labeling
    manifest.tolerances = {"tol_db": args.tol_db}
    print(f"{spec.name} {mode} {args.labeling}: {fmt_db(th)} dB Eb/N0 (tol {args.tol_db} dB)")
    if args.trajectory:
        snr = th + args.trajectory_offset
        curves = curves_at(caches, ebn0_to_esn0(snr, rate), used_families(m))
        res = run_de(ens, m, curves, max_iter=args.max_iter)
        rows = [(t, z + 1, f"{p:.6e}") for t, row in enumerate(res.per_position_error)
                for z, p in enumerate(row)]
        write_csv(args.trajectory, ["iteration", "position", "error_prob"], rows, manifest)
    return 0


def cmd_exit(args, manifest):
    spec = code_spec(args, "uncoupled")
    profile = DegreeProfile.from_base_matrix(spec.uncoupled_matrix)
    cache = curve_caches(args, (args.labeling,))[args.labeling]
    es = ebn0_to_esn0(args.snr, code_rate(spec))
    cs = cache.at(es)
    ia = np.linspace(0.0, 1.0, args.points)
    vnd = vnd_demap_exit(profile, cs, ia)
    cnd = cnd_inverse(profile, ia)
    manifest.code, manifest.labeling = spec.name, args.labeling
    write_csv(args.out, ["i_a", "vnd", "cnd_inv"],
              [(f"{a:.6f}", f"{v:.6f}", f"{c:.6f}") for a, v, c in zip(ia, vnd, cnd)], manifest)
    print(f"EXIT chart {spec.name}/{args.labeling} at {args.snr} dB Eb/N0 -> {args.out}")
    return 0


def cmd_exit_threshold(args, manifest):
    spec = code_spec(args, "uncoupled")
    profile = DegreeProfile.from_base_matrix(spec.uncoupled_matrix)
    cache = curve_caches(args, (args.labeling,))[args.labeling]
    fn = bp_threshold_exit if args.kind == "bp" else map_threshold_area
    th = fn(profile, cache, tuple(args.bracket), args.tol_db, rate=code_rate(spec))
    print(f"{spec.name} {args.labeling} EXIT-{args.kind}: {fmt_db(th)} dB Eb/N0 (tol {args.tol_db} dB)")
    return 0


def cmd_wave_bec(args, manifest):
    spec = code_spec(args)
    ens = build_coupled(spec)
    known = parse_positions(args.known) if args.known else []
    res = bec_de(ens, args.epsilon, known, args.max_iter, args.known_fraction)
    print(f"{spec.name} eps={args.epsilon} known={known}: "
          f"{'decoded' if res.converged else 'stalled'} after {res.iterations_used} iterations")
    if args.out:
        manifest.code = spec.name
        rows = [(t, z + 1, f"{p:.6e}") for t, row in enumerate(res.per_position_error)
                for z, p in enumerate(row)]
        write_csv(args.out, ["iteration", "position", "erasure_prob"], rows, manifest)
    return 0


def cmd_mapping(args, manifest):
    try:
        m = load_mapping(args.file)
    except (MappingError, KeyError, ValueError) as err:
        print(f"cannot read mapping: {err}", file=sys.stderr)
        return 2
    rep = validate(m)
    print(f"column_sum={rep.column_sum:.3e} gray_balance={rep.gray_balance:.3e} "
          f"sp_balance={rep.sp_balance:.3e} range={rep.range_violation:.3e}")
    print("valid" if rep.passed else "INVALID")
    return 0 if rep.passed else 2


def optimizer_config(args) -> OptimizerConfig:
    values = read_config(args.config) if args.config else {}
    for key in ("population", "generations", "F", "CR", "seed", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if args.fitness_tol is not None:
        values["threshold_tol_db"] = args.fitness_tol
    if args.smoke:
        values.setdefault("population", 16)
        values.setdefault("generations", 60)
        values.setdefault("threshold_tol_db", 0.05)
    if "bracket" in values:
        values["bracket"] = tuple(values["bracket"])
    try:
        return OptimizerConfig(**values)
    except (TypeError, ValueError) as err:
        raise UsageError(f"bad optimizer config: {err}") from None


def _opt_ensemble(args):
    if args.smoke and args.L is None:
        args.L = 20
    return build_coupled(code_spec(args, "tail_biting"))


def cmd_optimize(args, manifest):
    if args.scheme not in SCHEMES:
        raise UsageError(f"scheme must be one of {SCHEMES}")
    cfg = optimizer_config(args)
    ens = _opt_ensemble(args)
    res = optimize_for_T(ens, args.scheme, args.T, cfg, curve_caches(args))
    manifest.seed, manifest.code, manifest.labeling = cfg.seed, ens.name, args.scheme
    manifest.tolerances = {"fitness_tol_db": cfg.threshold_tol_db, "final_tol_db": cfg.final_tol_db}
    print(f"{ens.name} {args.scheme} T={args.T}: {fmt_db(res.threshold_db)} dB Eb/N0 "
          f"(tol {cfg.final_tol_db} dB, {res.evaluations} evaluations)")
    if args.out:
        payload = res.mapping.to_dict(4, ens.n_positions, ens.n_prime)
        payload.update(scheme=args.scheme, threshold_db=res.threshold_db, history=res.history)
        write_json(args.out, payload, manifest)
    return 0


def cmd_sweep(args, manifest):
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise UsageError(f"unknown schemes {bad}")
    cfg = optimizer_config(args)
    ens = _opt_ensemble(args)
    T_range = parse_int_range(args.T)
    if max(T_range) > ens.n_positions:
        raise UsageError(f"T must not exceed L={ens.n_positions}")

    def progress(s, T, th):
        print(f"{s:6s} T={T:3d} {fmt_db(th)} dB", flush=True)

    res = sweep_T(ens, schemes, T_range, cfg, curve_caches(args), progress)
    manifest.seed, manifest.code, manifest.labeling = cfg.seed, ens.name, ",".join(schemes)
    manifest.tolerances = {"fitness_tol_db": cfg.threshold_tol_db, "final_tol_db": cfg.final_tol_db}
    if args.out:
        rows = [(s, T, f"{e.threshold_db:.4f}") for (s, T), e in sorted(res.entries.items())]
        write_csv(args.out, ["scheme", "T", "threshold_db"], rows, manifest)
    return 0


def cmd_table1(args, manifest):
    caches = curve_caches(args)

    def progress(r):
        mark = "ok  " if r["passed"] else "FAIL"
        print(f"{mark} {r['code']} {r['labeling']:4s} {r['regime']:9s} {r['method']:4s} "
              f"ref {r['reference_db']:.3f}  got {fmt_db(r['computed_db'])}  "
              f"delta {r['delta_db']:+.3f} (tol {r['tolerance_db']:.2f})", flush=True)

    rows = table1_rows(caches, args.tol_db, args.search_tol_db, progress)
    n_fail = sum(not r["passed"] for r in rows)
    print(f"{len(rows) - n_fail}/{len(rows)} cells within tolerance")
    if args.out:
        manifest.tolerances = {"tol_db": args.tol_db, "search_tol_db": args.search_tol_db}
        write_csv(args.out, list(rows[0]), [list(r.values()) for r in rows], manifest)
    return 0 if n_fail == 0 else 2


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache-dir", default=None,
                        help="demapper curve cache (default: $WAVELAB_CACHE_DIR or ~/.cache/wavelab)")
    common.add_argument("--n-symbols", type=int, default=DEFAULT_N_SYMBOLS,
                        help="Monte Carlo symbols per demapper curve point")
    common.add_argument("--curve-seed", type=int, default=0, help="seed of the demapper curves")
    common.add_argument("--codes-file", default=None, help="extra code definitions (JSON)")

    p = argparse.ArgumentParser(prog="wavelab", description="Thresholds and mapping optimization "
                                "for tail-biting spatially coupled LDPC codes with 16-QAM.")
    p.add_argument("--version", action="version", version=f"wavelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("codes", parents=[common], help="list or show code ensembles")
    s.add_argument("action", choices=["list", "show"])
    s.add_argument("name", nargs="?")
    s.add_argument("--mode", default=None)
    s.add_argument("--L", type=int, default=None)
    s.add_argument("--matrix", action="store_true", help="also print the coupled base matrix")
    s.set_defaults(func=cmd_codes)

    s = sub.add_parser("curves", parents=[common], help="simulate demapper EXIT curves")
    s.add_argument("--labeling", required=True)
    s.add_argument("--snr", type=float, required=True, help="Es/N0 in dB")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid-points", type=int, default=21)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_curves)

    s = sub.add_parser("threshold", parents=[common], help="GA density-evolution threshold")
    s.add_argument("--code", required=True)
    s.add_argument("--mode", default="tailbiting")
    s.add_argument("--labeling", default="gray")
    s.add_argument("--mapping", default=None, help="mapping file (JSON or CSV) instead of uniform")
    s.add_argument("--L", type=int, default=None)
    s.add_argument("--tol-db", type=float, default=0.01)
    s.add_argument("--bracket", type=float, nargs=2, default=(0.5, 9.0))
    s.add_argument("--max-iter", type=int, default=40_000)
    s.add_argument("--trajectory", default=None, help="write per-position error CSV here")
    s.add_argument("--trajectory-offset", type=float, default=0.1,
                   help="dB above the threshold for the trajectory run")
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("exit", parents=[common], help="EXIT chart of the uncoupled ensemble")
    s.add_argument("--code", required=True)
    s.add_argument("--labeling", required=True, choices=LABELINGS)
    s.add_argument("--snr", type=float, required=True, help="Eb/N0 in dB")
    s.add_argument("--points", type=int, default=201)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_exit)

    s = sub.add_parser("exit-threshold", parents=[common], help="EXIT tunnel or area threshold")
    s.add_argument("--code", required=True)
    s.add_argument("--labeling", required=True, choices=LABELINGS)
    s.add_argument("--kind", choices=["bp", "map"], default="bp")
    s.add_argument("--tol-db", type=float, default=0.01)
    s.add_argument("--bracket", type=float, nargs=2, default=(0.5, 9.0))
    s.set_defaults(func=cmd_exit_threshold)

    s = sub.add_parser("wave-bec", parents=[common], help="erasure DE with known positions")
    s.add_argument("--code", required=True)
    s.add_argument("--mode", default="tailbiting")
    s.add_argument("--L", type=int, default=None)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--known", default="", help="1-based positions, e.g. 25,26,27 or 25..27")
    s.add_argument("--known-fraction", type=float, default=1.0)
    s.add_argument("--max-iter", type=int, default=5000)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_wave_bec)

    s = sub.add_parser("mapping", parents=[common], help="mapping file tools")
    s.add_argument("action", choices=["validate"])
    s.add_argument("file")
    s.set_defaults(func=cmd_mapping)

    opt = argparse.ArgumentParser(add_help=False)
    opt.add_argument("--code", required=True)
    opt.add_argument("--L", type=int, default=None)
    opt.add_argument("--seed", type=int, default=None)
    opt.add_argument("--population", type=int, default=None)
    opt.add_argument("--generations", type=int, default=None)
    opt.add_argument("--F", type=float, default=None)
    opt.add_argument("--CR", type=float, default=None)
    opt.add_argument("--workers", type=int, default=None)
    opt.add_argument("--fitness-tol", type=float, default=None)
    opt.add_argument("--config", default=None, help="key = value file with optimizer settings")
    opt.add_argument("--smoke", action="store_true", help="L=20 and the reduced budget")
    opt.add_argument("--out", default=None)

    s = sub.add_parser("optimize", parents=[common, opt], help="optimize a two-vector mapping")
    s.add_argument("--scheme", required=True)
    s.add_argument("--T", type=int, required=True)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("sweep", parents=[common, opt], help="optimize over a range of T")
    s.add_argument("--schemes", default="gray,sp,hybrid")
    s.add_argument("--T", default="0..14")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("table1", parents=[common], help="regress all reference thresholds")
    s.add_argument("--tol-db", type=float, default=0.1)
    s.add_argument("--search-tol-db", type=float, default=0.01)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_table1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.cache_dir is None:
        args.cache_dir = str(default_cache_dir())
    manifest = RunManifest(command_line=["wavelab", *argv])
    try:
        return args.func(args, manifest)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"wavelab: error: {err}", file=sys.stderr)
        return 2
    except (MappingError, BracketError) as err:
        print(f"wavelab: {err}", file=sys.stderr)
        return 2 if isinstance(err, MappingError) else 1
    except Exception as err:  # noqa: BLE001 - report, don't trace, at the CLI boundary
        if os.environ.get("WAVELAB_DEBUG"):
            raise
        print(f"wavelab: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
