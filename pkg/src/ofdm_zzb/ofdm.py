"""OFDM configuration and noiseless pilot autocorrelation functions.

Delays ``z`` are measured in samples of the OFDM sample period ``Ts`` and are
real-valued.  Allocation vectors are indexed by subcarrier ``k = 0..K-1``; the
signed frequency distance ``d[k]`` is applied on demand.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class DetectionScheme(str, enum.Enum):
    COHERENT = "coherent"
    NONCOHERENT = "noncoherent"

    @classmethod
    def parse(cls, value: "str | DetectionScheme") -> "DetectionScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown detection scheme {value!r}") from None


@dataclass(frozen=True)
class OfdmConfig:
    """Subcarrier grid and a-priori delay window.

    ``Na`` is the width of the uniform TOA prior in samples.  The sample
    period follows from the grid, ``Ts = 1 / (K * delta_f)``.
    """

    K: int = 64
    delta_f: float = 15.625e3
    Na: float = 16.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 4 or self.K % 2:
            raise DomainError(f"K must be an even integer >= 4, got {self.K}")
        if not self.delta_f > 0:
            raise DomainError(f"delta_f must be positive, got {self.delta_f}")
        if not 0 < self.Na <= self.K:
            raise DomainError(f"Na must lie in (0, K], got {self.Na}")

    @property
    def Ts(self) -> float:
        return 1.0 / (self.K * self.delta_f)

    @property
    def Ta(self) -> float:
        return self.Na * self.Ts

    @property
    def prior_variance(self) -> float:
        """Variance of the uniform delay prior in seconds squared."""
        return self.Ts**2 * self.Na**2 / 12.0

    def distances(self) -> np.ndarray:
        return subcarrier_distances(self.K)


def subcarrier_distance(k: int, K: int) -> int:
    """Signed distance of subcarrier ``k`` from the carrier, in subcarriers."""
    if K % 2 or K < 2:
        raise DomainError(f"K must be a positive even integer, got {K}")
    if not 0 <= k < K:
        raise DomainError(f"subcarrier index {k} outside [0, {K})")
    return k if k < K // 2 else k - K


def subcarrier_distances(K: int) -> np.ndarray:
    k = np.arange(K)
    return np.where(k < K // 2, k, k - K)


def subcarrier_index(d: int, K: int) -> int:
    """Inverse of :func:`subcarrier_distance`."""
    if not -K // 2 <= d < K // 2:
        raise DomainError(f"distance {d} outside [-{K // 2}, {K // 2})")
    return d % K


def check_allocation(rho, K: int | None = None, *, tol: float = 1e-12, unit_mass: bool = False) -> np.ndarray:
    """Return ``rho`` as a float array after checking nonnegativity and mass.

    The mass may fall short of one (partial allocations), never exceed it;
    ``unit_mass=True`` requires it to equal one within ``1e-9``.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1:
        raise DomainError("allocation must be a 1-D vector")
    if K is not None and rho.size != K:
        raise DomainError(f"allocation has {rho.size} entries, expected {K}")
    if not np.all(np.isfinite(rho)):
        raise DomainError("allocation contains non-finite entries")
    if np.any(rho < 0):
        raise DomainError("allocation has negative entries")
    if rho.sum() > 1 + tol:
        raise DomainError(f"allocation mass {rho.sum()!r} exceeds 1")
    if unit_mass and abs(rho.sum() - 1.0) > 1e-9:
        raise DomainError(f"allocation mass {rho.sum()!r} is not 1")
    return rho


def uniform_allocation(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


def _phases(z, K):
    z = np.asarray(z, dtype=float)
    d = subcarrier_distances(K)
    return 2 * np.pi * z[..., None] * d / K


def acf_coherent(z, rho, cfg: OfdmConfig | None = None):
    """Coherent ACF ``sum_k rho[k] cos(2 pi z d[k] / K)``.

    Accepts scalar or array ``z``; returns the same shape.
    """
    rho = np.asarray(rho, dtype=float)
    K = rho.size if cfg is None else cfg.K
    out = np.cos(_phases(z, K)) @ rho
    return float(out) if np.ndim(out) == 0 else out


def acf_complex(z, rho, cfg: OfdmConfig | None = None):
    rho = np.asarray(rho, dtype=float)
    K = rho.size if cfg is None else cfg.K
    out = np.exp(1j * _phases(z, K)) @ rho
    return complex(out) if np.ndim(out) == 0 else out


def acf_noncoherent(z, rho, cfg: OfdmConfig | None = None):
    """Noncoherent ACF: the squared magnitude of the complex ACF."""
    rho = np.asarray(rho, dtype=float)
    K = rho.size if cfg is None else cfg.K
    ph = _phases(z, K)
    c = np.cos(ph) @ rho
    s = np.sin(ph) @ rho
    out = c * c + s * s
    return float(out) if np.ndim(out) == 0 else out
