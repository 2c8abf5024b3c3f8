"""Run configuration: YAML document plus command-line overrides.

Defaults reproduce the reference setup: K = 64, 15.625 kHz spacing,
Na = 16, L = 8, gap tolerance 0.01, 2000 branch-and-bound iterations and an
SNR grid of -12..30 dB (integrated SNR) in 1 dB steps.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .bounds import QuadratureSpec
from .convex import DEFAULT_MAX_ITER, DEFAULT_TOL, CAPPED_MAX_ITER
from .integer import BnbConfig
from .ofdm import DetectionScheme, DomainError, OfdmConfig
from .sim import DEFAULT_OVERSAMPLE, TABLE_Z0, CampaignSpec

JOBS_ENV = "OFDM_ZZB_JOBS"
CONVENTIONS = ("integrated", "per_subcarrier")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class SnrGrid:
    """SNR points in dB under an explicit convention.

    ``integrated`` means ``gamma = g P / sigma^2``; ``per_subcarrier`` means
    ``gamma / K``.  ``-inf`` dB is allowed and stands for zero SNR.
    """

    values_db: tuple = tuple(float(v) for v in range(-12, 31))
    convention: str = "integrated"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"snr convention must be one of {CONVENTIONS}")
        v = np.asarray(self.values_db, dtype=float)
        if v.size == 0:
            raise ConfigError("snr grid is empty")
        if np.any(np.isnan(v)) or np.any(v == np.inf):
            raise ConfigError("snr grid values must be finite or -inf")
        if not np.all(v[1:] > v[:-1]):
            raise ConfigError("snr grid must be strictly increasing")

    def gamma(self, db: float, K: int) -> float:
        g = 10 ** (db / 10)
        return g * K if self.convention == "per_subcarrier" else g

    def to_db(self, gamma: float, K: int) -> float:
        if not gamma > 0:
            return -math.inf
        g = gamma / K if self.convention == "per_subcarrier" else gamma
        return 10 * math.log10(g)


@dataclass(frozen=True)
class SolverSettings:
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.max_iter < 1 or not self.tol > 0:
            raise ConfigError("solver needs max_iter >= 1 and tol > 0")


@dataclass(frozen=True)
class SimSettings:
    trials: int = 25_000
    discard: int = 50
    m_snr: int = 250
    noise_symbols: int = 1000
    z0: float | str = TABLE_Z0
    phase_rule: str = "unit"
    oversample: int = DEFAULT_OVERSAMPLE
    noiseless: bool = False
    allocations: str = "uniform"  # "uniform" or an optimize CSV

    def __post_init__(self):
        if self.m_snr < 1 or self.noise_symbols < 1:
            raise ConfigError("m_snr and noise_symbols must be >= 1")
        try:
            self.campaign()
        except DomainError as exc:
            raise ConfigError(f"sim: {exc}") from exc

    def campaign(self) -> CampaignSpec:
        return CampaignSpec(self.trials, self.discard, self.z0, self.phase_rule, self.oversample)


@dataclass(frozen=True)
class AcfSettings:
    points: int = 1601
    db: bool = False

    def __post_init__(self):
        if self.points < 2:
            raise ConfigError("acf needs at least two points")


@dataclass(frozen=True)
class RunConfig:
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    scheme: DetectionScheme = DetectionScheme.COHERENT
    snr: SnrGrid = field(default_factory=SnrGrid)
    constraint: str = "convex"
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    solver: SolverSettings = field(default_factory=SolverSettings)
    bnb: BnbConfig = field(default_factory=BnbConfig)
    sim: SimSettings = field(default_factory=SimSettings)
    acf: AcfSettings = field(default_factory=AcfSettings)
    allocation: str = "uniform"  # evaluate / acf input: "uniform" or a file
    output_dir: str = "runs"
    seed: int = 0
    jobs: int | None = None

    def __post_init__(self):
        if self.constraint not in ("convex", "integer"):
            raise ConfigError("constraint must be 'convex' or 'integer'")
        if self.bnb.L > self.ofdm.K:
            raise ConfigError(f"L={self.bnb.L} exceeds K={self.ofdm.K}")

    def resolved_jobs(self) -> int:
        if self.jobs is not None:
            return max(int(self.jobs), 1)
        env = os.environ.get(JOBS_ENV)
        if env:
            try:
                return max(int(env), 1)
            except ValueError as exc:
                raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from exc
        return os.cpu_count() or 1

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scheme"] = self.scheme.value
        d["snr"]["values_db"] = list(self.snr.values_db)
        return d


# --------------------------------------------------------------------------
# parsing


def parse_snr_list(text: str) -> tuple:
    """``"-12:30:1"`` (inclusive range) or a comma separated list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1.0
            if not step > 0:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + i * step, 10) for i in range(max(n, 0)))
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse SNR list {text!r}") from exc


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown key(s) in {name!r}: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def _snr(data) -> SnrGrid:
    if data is None:
        return SnrGrid()
    if not isinstance(data, dict):
        raise ConfigError("section 'snr' must be a mapping")
    extra = set(data) - {"grid_db", "convention"}
    if extra:
        raise ConfigError(f"unknown key(s) in 'snr': {sorted(extra)}")
    grid = data.get("grid_db", SnrGrid.values_db)
    if isinstance(grid, str):
        grid = parse_snr_list(grid)
    elif isinstance(grid, (int, float)):
        grid = (float(grid),)
    try:
        values = tuple(float(v) for v in grid)
    except (TypeError, ValueError) as exc:
        raise ConfigError("snr.grid_db must be a list of numbers or a 'start:stop:step' string") from exc
    return SnrGrid(values, data.get("convention", "integrated"))


_TOP = {
    "ofdm", "scheme", "snr", "constraint", "quadrature", "solver", "bnb",
    "sim", "acf", "allocation", "output_dir", "seed", "jobs", "preset",
}


def from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    extra = set(data) - _TOP
    if extra:
        raise ConfigError(f"unknown top-level key(s): {sorted(extra)}")
    solver = dict(data.get("solver") or {})
    preset = data.get("preset")
    if preset not in (None, "default", "capped"):
        raise ConfigError(f"unknown preset {preset!r}")
    if preset == "capped":
        solver.setdefault("max_iter", CAPPED_MAX_ITER)
    constraint = data.get("constraint", "convex")
    bnb_data = dict(data.get("bnb") or {})
    if isinstance(constraint, dict):
        c = dict(constraint)
        kind = c.pop("kind", "convex")
        for key in ("L", "pin_anchor"):
            if key in c:
                bnb_data[key] = c.pop(key)
        if c:
            raise ConfigError(f"unknown key(s) in 'constraint': {sorted(c)}")
        constraint = kind
    try:
        scheme = DetectionScheme.parse(data.get("scheme", "coherent"))
    except (ValueError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return RunConfig(
        ofdm=_section(OfdmConfig, data.get("ofdm"), "ofdm"),
        scheme=scheme,
        snr=_snr(data.get("snr")),
        constraint=str(constraint),
        quadrature=_section(QuadratureSpec, data.get("quadrature"), "quadrature"),
        solver=_section(SolverSettings, solver, "solver"),
        bnb=_section(BnbConfig, bnb_data, "bnb"),
        sim=_section(SimSettings, data.get("sim"), "sim"),
        acf=_section(AcfSettings, data.get("acf"), "acf"),
        allocation=str(data.get("allocation", "uniform")),
        output_dir=str(data.get("output_dir", "runs")),
        seed=seed,
        jobs=data.get("jobs"),
    )


def load(path: str | None) -> dict:
    """Read a YAML config into a plain dict (empty when no path is given)."""
    if path is None:
        return {}
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def apply_overrides(data: dict, **over) -> dict:
    """Merge command-line flags into a config dict; ``None`` means unset."""
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    if over.get("snr_db") is not None:
        snr = dict(data.get("snr") or {})
        snr["grid_db"] = parse_snr_list(over["snr_db"])
        data["snr"] = snr
    if over.get("snr_convention") is not None:
        snr = dict(data.get("snr") or {})
        snr["convention"] = over["snr_convention"]
        data["snr"] = snr
    for key in ("scheme", "seed", "jobs", "allocation", "preset"):
        if over.get(key) is not None:
            data[key] = over[key]
    if over.get("out") is not None:
        data["output_dir"] = over["out"]
    if over.get("acf_db") is not None:
        acf = dict(data.get("acf") or {})
        acf["db"] = bool(over["acf_db"])
        data["acf"] = acf
    constraint = data.get("constraint", "convex")
    if isinstance(constraint, dict):
        constraint = dict(constraint)
    if over.get("constraint") is not None:
        if isinstance(constraint, dict):
            constraint["kind"] = over["constraint"]
        else:
            constraint = over["constraint"]
    if over.get("L") is not None:
        bnb = dict(data.get("bnb") or {})
        bnb["L"] = over["L"]
        data["bnb"] = bnb
        if isinstance(constraint, dict):
            constraint.pop("L", None)
    data["constraint"] = constraint
    return data
