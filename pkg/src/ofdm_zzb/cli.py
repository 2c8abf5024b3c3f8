"""Command-line front end: evaluate, optimize, simulate, acf.

Every run writes its table(s) as CSV plus a ``<name>.meta.json`` sidecar with
the resolved configuration, the SNR convention and the package version.
Floats are written with ``repr`` and JSON with sorted keys, so identical
inputs give byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 a sweep point failed or did
not converge, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import BoundQuery, SingularInformationError, crlb, zzb
from .config import ConfigError, RunConfig, apply_overrides, from_dict, load
from .convex import ConvexProblem, NumericalError, solve
from .integer import solve_bnb
from .ofdm import DomainError, acf_coherent, acf_noncoherent, check_allocation, uniform_allocation
from .sim import measure_snr, run_campaign

log = logging.getLogger("ofdm_zzb")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
DB_FLOOR = -20.0

SIMULATE_COLUMNS = ["snr_db_requested", "snr_db_estimated", "rmse_s", "rmse_m", "trials", "mean_z"]
EVALUATE_COLUMNS = ["snr_db", "zzb_s2", "crlb_s2"]


def optimize_columns(K: int) -> list:
    return ["snr_db", "zzb_s2", "crlb_s2", "gap", "iterations"] + [f"rho_{k}" for k in range(K)]


@dataclass
class SweepRecord:
    snr_db: float
    allocation: np.ndarray
    zzb_seconds2: float
    crlb_seconds2: float
    iterations: int = 0
    gap: float = 0.0
    converged: bool = True
    error: str | None = None
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# file helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(path: str, columns: list, rows: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_meta(path: str, cfg: RunConfig, command: str, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "config": cfg.as_dict(),
        "snr_convention": cfg.snr.convention,
        "units": {"zzb_s2": "s^2", "crlb_s2": "s^2", "rmse_s": "s", "rmse_m": "m", "mean_z": "samples"},
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, frozenset | set):
        return sorted(o)
    return str(o)


def read_csv(path: str):
    """Header and float rows of a CSV written by this tool."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = rows[0]
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            out.append([float(v) for v in row])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return header, np.array(out).reshape(len(out), len(header))


def read_allocation(source: str, K: int) -> np.ndarray:
    """``uniform`` or a text file holding K powers (commas or whitespace, ``#`` comments)."""
    if source == "uniform":
        return uniform_allocation(K)
    values, first = [], None
    with open(source) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            first = first or lineno
            for tok in text.replace(",", " ").split():
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ConfigError(f"{source}:{lineno}: not a number: {tok!r}") from None
    if len(values) != K:
        raise ConfigError(f"{source}:{first or 1}: expected {K} values, got {len(values)}")
    try:
        rho = check_allocation(values, K, tol=1e-9, unit_mass=True)
    except DomainError as exc:
        raise ConfigError(f"{source}:{first}: {exc}") from exc
    return rho


def read_library(path: str, K: int):
    """SNR points (dB) and allocation rows from an optimize CSV, plus its convention."""
    header, data = read_csv(path)
    cols = optimize_columns(K)
    if header != cols:
        raise ConfigError(f"{path}:1: not an optimize table for K={K}")
    convention = None
    meta = path[:-4] + ".meta.json" if path.endswith(".csv") else None
    if meta and os.path.exists(meta):
        with open(meta) as fh:
            convention = json.load(fh).get("snr_convention")
    rho = data[:, 5:]
    ok = np.all(np.isfinite(rho), axis=1)
    if not np.any(ok):
        raise ConfigError(f"{path}: no usable allocation rows")
    return data[ok, 0], rho[ok], convention


# --------------------------------------------------------------------------
# sweep points (top level so worker processes can pickle them)


def _query(cfg: RunConfig, db: float) -> BoundQuery:
    return BoundQuery(cfg.scheme, cfg.snr.gamma(db, cfg.ofdm.K), cfg.ofdm, cfg.quadrature)


def _crlb_or_inf(rho, gamma, cfg) -> float:
    try:
        return crlb(rho, gamma, cfg)
    except SingularInformationError:
        return math.inf


def optimize_point(cfg: RunConfig, db: float) -> SweepRecord:
    q = _query(cfg, db)
    K = cfg.ofdm.K
    try:
        if cfg.constraint == "convex":
            rep = solve(ConvexProblem(q), max_iter=cfg.solver.max_iter, tol=cfg.solver.tol)
            rho, obj, its, gap, ok = rep.rho_star, rep.objective, rep.iterations, 0.0, rep.converged
        else:
            rep = solve_bnb(q, cfg.bnb)
            rho, obj, its, gap = rep.rho_star, rep.upper_bound, rep.iterations, rep.gap
            ok = gap <= cfg.bnb.delta_tol and rep.unconverged_relaxations == 0
    except (NumericalError, DomainError) as exc:
        return SweepRecord(db, np.full(K, math.nan), math.nan, math.nan, 0, math.nan, False, str(exc))
    return SweepRecord(db, rho, obj, _crlb_or_inf(rho, q.gamma, cfg.ofdm), its, gap, ok)


def simulate_point(cfg: RunConfig, index: int, db: float, library) -> SweepRecord:
    K = cfg.ofdm.K
    gamma = cfg.snr.gamma(db, K)
    seeds = np.random.SeedSequence([cfg.seed, index]).generate_state(2)
    if cfg.sim.noiseless:
        est_db = math.inf
    else:
        est = measure_snr(cfg.ofdm, gamma, cfg.sim.m_snr, cfg.sim.noise_symbols, int(seeds[0]))
        est_db = cfg.snr.to_db(est.gamma_hat, K)
    if library is None:
        rho = uniform_allocation(K)
    else:
        lib_db, lib_rho = library
        key = est_db if math.isfinite(est_db) else db
        rho = lib_rho[int(np.argmin(np.abs(lib_db - key)))]
    rep = run_campaign(rho, cfg.scheme, gamma, cfg.sim.campaign(), int(seeds[1]), cfg.ofdm, cfg.sim.noiseless)
    rec = SweepRecord(db, rho, math.nan, _crlb_or_inf(rho, gamma, cfg.ofdm))
    rec.extra = {
        "snr_db_estimated": est_db,
        "rmse_s": rep.rmse_seconds,
        "rmse_m": rep.rmse_meters,
        "trials": rep.trials_used,
        "mean_z": rep.mean_estimate,
    }
    return rec


def _run_points(cfg: RunConfig, fn, args_list):
    jobs = min(cfg.resolved_jobs(), len(args_list))
    if jobs <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


# --------------------------------------------------------------------------
# commands


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def acf_trace(cfg: RunConfig, rho):
    z = np.linspace(0.0, cfg.ofdm.Na, cfg.acf.points)
    return z, acf_coherent(z, rho, cfg.ofdm), acf_noncoherent(z, rho, cfg.ofdm)


def to_db(values, floor: float | None = None):
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(np.maximum(v, 1e-300))
    if floor is not None:
        out = np.where(v > 0, np.maximum(out, floor), floor)
    return out


def _acf_rows(cfg: RunConfig, rho):
    z, ac, an = acf_trace(cfg, rho)
    if cfg.acf.db:
        cols = ["z", "A_C", "A_N", "A_C_db", "A_N_db"]
        rows = zip(z, ac, an, to_db(ac, DB_FLOOR), to_db(an))
    else:
        cols = ["z", "A_C", "A_N"]
        rows = zip(z, ac, an)
    return cols, list(rows)


def cmd_evaluate(cfg: RunConfig) -> int:
    rho = read_allocation(cfg.allocation, cfg.ofdm.K)
    rows = []
    for db in cfg.snr.values_db:
        q = _query(cfg, db)
        rows.append((db, zzb(rho, q), _crlb_or_inf(rho, q.gamma, cfg.ofdm)))
    write_csv(_out(cfg, "evaluate.csv"), EVALUATE_COLUMNS, rows)
    cols, acf_rows = _acf_rows(cfg, rho)
    write_csv(_out(cfg, "evaluate_acf.csv"), cols, acf_rows)
    write_meta(_out(cfg, "evaluate.meta.json"), cfg, "evaluate")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    recs = _run_points(cfg, optimize_point, [(cfg, db) for db in cfg.snr.values_db])
    rows = [[r.snr_db, r.zzb_seconds2, r.crlb_seconds2, r.gap, r.iterations, *r.allocation] for r in recs]
    write_csv(_out(cfg, "optimize.csv"), optimize_columns(cfg.ofdm.K), rows)
    failures = {_fmt(r.snr_db): (r.error or "not converged") for r in recs if not r.converged}
    write_meta(_out(cfg, "optimize.meta.json"), cfg, "optimize", {"failures": failures})
    for db, why in failures.items():
        log.warning("SNR %s dB: %s", db, why)
    return EXIT_SOLVER if failures else EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    library, lib_meta = None, {}
    if cfg.sim.allocations != "uniform":
        try:
            lib_db, lib_rho, convention = read_library(cfg.sim.allocations, cfg.ofdm.K)
        except FileNotFoundError as exc:
            raise ConfigError(f"allocation library not found: {cfg.sim.allocations}") from exc
        if convention and convention != cfg.snr.convention:
            # express library SNRs in this run's convention
            shift = 10 * math.log10(cfg.ofdm.K)
            lib_db = lib_db + (shift if convention == "per_subcarrier" else -shift)
        library = (lib_db, lib_rho)
        lib_meta = {"library": cfg.sim.allocations, "library_convention": convention or cfg.snr.convention}
    args = [(cfg, i, db, library) for i, db in enumerate(cfg.snr.values_db)]
    recs = _run_points(cfg, simulate_point, args)
    rows = [
        [r.snr_db, r.extra["snr_db_estimated"], r.extra["rmse_s"], r.extra["rmse_m"], r.extra["trials"], r.extra["mean_z"]]
        for r in recs
    ]
    write_csv(_out(cfg, "simulate.csv"), SIMULATE_COLUMNS, rows)
    write_meta(_out(cfg, "simulate.meta.json"), cfg, "simulate", lib_meta)
    return EXIT_OK


def cmd_acf(cfg: RunConfig) -> int:
    rho = read_allocation(cfg.allocation, cfg.ofdm.K)
    cols, rows = _acf_rows(cfg, rho)
    write_csv(_out(cfg, "acf.csv"), cols, rows)
    write_meta(_out(cfg, "acf.meta.json"), cfg, "acf")
    return EXIT_OK


COMMANDS = {"evaluate": cmd_evaluate, "optimize": cmd_optimize, "simulate": cmd_simulate, "acf": cmd_acf}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ofdm-zzb", description="Ziv-Zakai bounds and pilot power allocation for OFDM ranging")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML configuration file")
        s.add_argument("--snr-db", help="SNR grid: 'start:stop:step' or a comma list")
        s.add_argument("--snr-convention", choices=["integrated", "per_subcarrier"])
        s.add_argument("--scheme", choices=["coherent", "noncoherent"])
        s.add_argument("--constraint", choices=["convex", "integer"])
        s.add_argument("--L", type=int, dest="L")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--jobs", type=int, help="worker processes (default: $OFDM_ZZB_JOBS or CPU count)")
        s.add_argument("--preset", choices=["default", "capped"], help="'capped' stops the convex solver after 30 iterations")
        s.add_argument("--allocation", help="'uniform' or a file of K powers (evaluate, acf)")
        s.add_argument("--db", action="store_const", const=True, help="add dB columns to ACF traces")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args) -> RunConfig:
    data = load(args.config)
    data = apply_overrides(
        data,
        snr_db=args.snr_db,
        snr_convention=args.snr_convention,
        scheme=args.scheme,
        constraint=args.constraint,
        L=args.L,
        seed=args.seed,
        out=args.out,
        jobs=args.jobs,
        preset=args.preset,
        allocation=args.allocation,
        acf_db=args.db,
    )
    return from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
