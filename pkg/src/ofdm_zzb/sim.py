"""Monte Carlo ranging over a frequency-domain AWGN channel.

A pilot symbol with per-subcarrier power ``P rho[k]`` is delayed, phase
rotated and corrupted by circular Gaussian noise; the receiver correlates
against the known payload and takes the argmax of the coherent or
noncoherent metric over ``[0, Na]``.

SNR bookkeeping: ``gamma`` is always the integrated SNR ``g P / sigma^2``.
Per-subcarrier figures are ``gamma / K`` and are labelled as such.

Every trial draws from its own child of ``SeedSequence(seed)``, so a
campaign is reproducible and trial ``m`` does not depend on how many trials
ran before it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ofdm import (
    DetectionScheme,
    DomainError,
    OfdmConfig,
    check_allocation,
    subcarrier_distances,
    uniform_allocation,
)

SPEED_OF_LIGHT = 299_792_458.0
TABLE_Z0 = 10.441  # samples; the relative delay of the reference measurement
DEFAULT_OVERSAMPLE = 64


@dataclass(frozen=True)
class ChannelParams:
    gain: float = 1.0
    z0: float = TABLE_Z0
    phi0: float = 0.0
    noise_var: float = 0.0

    def __post_init__(self):
        if not self.gain > 0:
            raise DomainError("gain must be positive")
        if not self.noise_var >= 0:
            raise DomainError("noise_var must be >= 0")


@dataclass(frozen=True)
class PilotSymbol:
    x: np.ndarray
    total_power: float

    @property
    def K(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class SearchGrid:
    """Uniform delay grid on ``[0, Na]`` with ``oversample`` points per sample."""

    Na: float
    oversample: int = DEFAULT_OVERSAMPLE

    def __post_init__(self):
        if not self.Na > 0 or self.oversample < 1:
            raise DomainError("grid needs Na > 0 and oversample >= 1")

    @property
    def z(self) -> np.ndarray:
        n = int(math.ceil(self.Na * self.oversample))
        return np.linspace(0.0, self.Na, n + 1)


@dataclass(frozen=True)
class SnrEstimate:
    """Outcome of the SNR measurement stage.

    ``raw`` is the peak of ``|sum_m A_m(z)|^2 / sigma_hat^2``; ``gamma_hat``
    divides it by ``M^2 P`` to give an integrated SNR, and ``per_subcarrier``
    is ``gamma_hat / K``.
    """

    raw: float
    gamma_hat: float
    per_subcarrier: float
    noise_floor: float
    below_threshold: bool

    @property
    def db_integrated(self) -> float:
        return 10 * math.log10(max(self.gamma_hat, 1e-300))

    @property
    def db_per_subcarrier(self) -> float:
        return 10 * math.log10(max(self.per_subcarrier, 1e-300))


@dataclass(frozen=True)
class SimReport:
    rmse_samples: float
    rmse_seconds: float
    rmse_meters: float
    mean_estimate: float
    trials_used: int
    gamma: float
    gamma_per_subcarrier: float
    estimated_snr: SnrEstimate | None = None


# --------------------------------------------------------------------------
# signal chain


def make_symbol(rho, total_power: float, phase_rule: str = "unit", rng=None, cfg=None) -> PilotSymbol:
    """Payload with ``|x[k]|^2 = P rho[k]``; phases all zero or uniform random."""
    rho = check_allocation(rho, None if cfg is None else cfg.K)
    if not total_power > 0:
        raise DomainError("total_power must be positive")
    mag = np.sqrt(total_power * rho)
    if phase_rule == "unit":
        x = mag.astype(complex)
    elif phase_rule == "random":
        rng = np.random.default_rng(rng)
        x = mag * np.exp(1j * rng.uniform(0.0, 2 * np.pi, rho.size))
    else:
        raise DomainError(f"unknown phase rule {phase_rule!r}")
    x[rho == 0] = 0.0
    return PilotSymbol(x, float(total_power))


def apply_channel(sym: PilotSymbol, ch: ChannelParams, rng=None) -> np.ndarray:
    """``y[k] = sqrt(g) exp(-j 2 pi d[k] z0 / K + j phi0) x[k] + v[k]``."""
    K = sym.K
    d = subcarrier_distances(K)
    alpha = math.sqrt(ch.gain) * np.exp(-2j * np.pi * d * ch.z0 / K + 1j * ch.phi0)
    y = alpha * sym.x
    if ch.noise_var > 0:
        rng = np.random.default_rng(rng)
        s = math.sqrt(ch.noise_var / 2)
        y = y + s * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    return y


def _steering(K: int, z) -> np.ndarray:
    d = subcarrier_distances(K)
    return np.exp(2j * np.pi * np.outer(d, np.atleast_1d(np.asarray(z, dtype=float))) / K)


def correlate(y, sym: PilotSymbol, z):
    """Complex correlation ``sum_k conj(x[k]) y[k] exp(j 2 pi z d[k] / K)``.

    ``y`` may be one received vector or a stack of them (trials x K).
    """
    y = np.asarray(y, dtype=complex)
    w = np.conj(sym.x) * y
    out = w @ _steering(sym.K, z)
    if np.ndim(z) == 0:
        out = out[..., 0]
        return complex(out) if out.ndim == 0 else out
    return out


def _metric(corr, scheme: DetectionScheme, phi0=None):
    if scheme is DetectionScheme.COHERENT:
        if phi0 is None:
            raise DomainError("coherent estimation needs the carrier phase")
        rot = np.exp(-1j * np.asarray(phi0, dtype=float))
        return np.real(np.reshape(rot, (-1, 1)) * corr) if np.ndim(rot) else np.real(rot * corr)
    return np.abs(corr) ** 2


def _refine(metric: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Grid argmax per row plus one parabolic step through its neighbours."""
    idx = np.argmax(metric, axis=-1)
    rows = np.arange(metric.shape[0])
    n = z.size
    inner = (idx > 0) & (idx < n - 1)
    i = np.clip(idx, 1, n - 2)
    m0, mm, mp = metric[rows, i], metric[rows, i - 1], metric[rows, i + 1]
    den = mm - 2 * m0 + mp
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den < 0, 0.5 * (mm - mp) / den, 0.0)
    off = np.clip(off, -0.5, 0.5)
    step = z[1] - z[0]
    return np.where(inner, z[i] + off * step, z[idx])


def estimate_toa(y, sym: PilotSymbol, scheme, phi0_known=None, grid: SearchGrid | None = None):
    """ML delay estimate in samples; accepts one vector or a (trials x K) stack."""
    scheme = DetectionScheme.parse(scheme)
    grid = grid or SearchGrid(OfdmConfig().Na)
    z = grid.z
    y2 = np.atleast_2d(np.asarray(y, dtype=complex))
    corr = (np.conj(sym.x) * y2) @ _steering(sym.K, z)
    est = _refine(_metric(corr, scheme, phi0_known), z)
    return float(est[0]) if np.ndim(y) == 1 else est


# --------------------------------------------------------------------------
# SNR measurement stage


def noise_floor(m_snr: int, Na: float) -> float:
    """Typical normalised peak of the SNR statistic when no signal is present.

    Each grid value is exponential with mean ``1/M``; the peak over roughly
    ``Na`` independent cells sits near ``(ln Na + 1) / M``.
    """
    return (math.log(max(Na, 1.0)) + 1.0) / m_snr


def estimate_snr(received, sym: PilotSymbol, noise_var_hat: float, cfg: OfdmConfig, grid=None) -> SnrEstimate:
    """Peak of the coherent sum of correlations over ``[0, Na]``, per noise power."""
    received = np.atleast_2d(np.asarray(received, dtype=complex))
    m = received.shape[0]
    if m < 1:
        raise DomainError("need at least one symbol")
    if not noise_var_hat > 0:
        raise DomainError("noise_var_hat must be positive")
    grid = grid or SearchGrid(cfg.Na)
    total = (np.conj(sym.x) * received.sum(axis=0)) @ _steering(sym.K, grid.z)
    raw = float(np.max(np.abs(total) ** 2) / noise_var_hat)
    gamma_hat = raw / (m * m * sym.total_power)
    floor = noise_floor(m, cfg.Na)
    return SnrEstimate(raw, gamma_hat, gamma_hat / cfg.K, floor, gamma_hat < 3 * floor)


def measure_snr(
    cfg: OfdmConfig,
    gamma: float,
    m_snr: int = 250,
    noise_symbols: int = 1000,
    seed=0,
    z0: float = TABLE_Z0,
) -> SnrEstimate:
    """Simulate the SNR stage: noise calibration, then ``m_snr`` uniform pilots."""
    if m_snr < 1:
        raise DomainError("m_snr must be >= 1")
    ss = np.random.SeedSequence(seed)
    cal, sig = (np.random.default_rng(s) for s in ss.spawn(2))
    P = float(cfg.K)
    noise_var = P / gamma if gamma > 0 else 1.0
    v = math.sqrt(noise_var / 2) * (
        cal.standard_normal((noise_symbols, cfg.K)) + 1j * cal.standard_normal((noise_symbols, cfg.K))
    )
    var_hat = float(np.mean(np.abs(v) ** 2))
    sym = make_symbol(uniform_allocation(cfg.K), P)
    gain = 1.0 if gamma > 0 else 0.0
    d = cfg.distances()
    phi0 = sig.uniform(0, 2 * np.pi)
    clean = math.sqrt(gain) * np.exp(-2j * np.pi * d * z0 / cfg.K + 1j * phi0) * sym.x
    noise = math.sqrt(noise_var / 2) * (
        sig.standard_normal((m_snr, cfg.K)) + 1j * sig.standard_normal((m_snr, cfg.K))
    )
    return estimate_snr(clean + noise, sym, var_hat, cfg)


# --------------------------------------------------------------------------
# TOA campaigns


@dataclass(frozen=True)
class CampaignSpec:
    trials: int = 25_000
    discard: int = 50
    z0: float | str = TABLE_Z0  # a delay in samples, or "uniform" over [0, Na)
    phase_rule: str = "unit"
    oversample: int = DEFAULT_OVERSAMPLE
    chunk: int = 2048

    def __post_init__(self):
        if self.trials - self.discard < 2 or self.discard < 0:
            raise DomainError("need at least two trials after the discarded ones")
        if isinstance(self.z0, str) and self.z0 != "uniform":
            raise DomainError(f"z0 must be a number or 'uniform', got {self.z0!r}")


def _draw_trials(spec: CampaignSpec, scheme, cfg, noise_var, seq: np.random.SeedSequence):
    """Per-trial delay, phase and noise, each from the trial's own stream."""
    n, K = spec.trials, cfg.K
    z0 = np.empty(n)
    phi0 = np.zeros(n)
    noise = np.empty((n, K), dtype=complex)
    s = math.sqrt(noise_var / 2)
    for m, child in enumerate(seq.spawn(n)):
        rng = np.random.default_rng(child)
        z0[m] = rng.uniform(0.0, cfg.Na) if spec.z0 == "uniform" else float(spec.z0)
        if scheme is DetectionScheme.NONCOHERENT:
            phi0[m] = rng.uniform(0.0, 2 * np.pi)
        noise[m] = s * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    return z0, phi0, noise


def run_campaign(
    alloc,
    scheme,
    gamma: float,
    spec: CampaignSpec = CampaignSpec(),
    seed=0,
    cfg: OfdmConfig | None = None,
    noiseless: bool = False,
) -> SimReport:
    """Repeated TOA estimates at integrated SNR ``gamma`` and their spread.

    Coherent campaigns keep ``phi0 = 0`` and give it to the estimator;
    noncoherent campaigns draw ``phi0`` per trial.  The spread is the
    sample standard deviation about the mean estimate, after the first
    ``discard`` trials are dropped.
    """
    cfg = cfg or OfdmConfig()
    scheme = DetectionScheme.parse(scheme)
    rho = check_allocation(alloc, cfg.K)
    if not gamma > 0 and not noiseless:
        # zero SNR means no signal: keep unit noise and switch the gain off
        gain, noise_var = 0.0, 1.0
    else:
        gain, noise_var = 1.0, (0.0 if noiseless else cfg.K / gamma)
    ss = np.random.SeedSequence(seed)
    sym_seed, trial_seed = ss.spawn(2)
    sym = make_symbol(rho, float(cfg.K), spec.phase_rule, np.random.default_rng(sym_seed), cfg)
    z0, phi0, noise = _draw_trials(spec, scheme, cfg, noise_var, trial_seed)

    d = cfg.distances()
    grid = SearchGrid(cfg.Na, spec.oversample)
    steer = _steering(cfg.K, grid.z)
    est = np.empty(spec.trials)
    for lo in range(0, spec.trials, spec.chunk):
        hi = min(lo + spec.chunk, spec.trials)
        alpha = math.sqrt(gain) * np.exp(-2j * np.pi * np.outer(z0[lo:hi], d) / cfg.K + 1j * phi0[lo:hi, None])
        y = alpha * sym.x + noise[lo:hi]
        corr = (np.conj(sym.x) * y) @ steer
        known = phi0[lo:hi] if scheme is DetectionScheme.COHERENT else None
        est[lo:hi] = _refine(_metric(corr, scheme, known), grid.z)

    kept = est[spec.discard :]
    mean = float(np.mean(kept))
    var = float(np.sum((kept - mean) ** 2)) / (kept.size - 1)
    rmse = math.sqrt(var)
    return SimReport(
        rmse_samples=rmse,
        rmse_seconds=rmse * cfg.Ts,
        rmse_meters=rmse * cfg.Ts * SPEED_OF_LIGHT,
        mean_estimate=mean,
        trials_used=int(kept.size),
        gamma=float(gamma),
        gamma_per_subcarrier=float(gamma) / cfg.K,
    )
