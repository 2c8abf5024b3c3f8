"""Binary-detection error probabilities, the Ziv-Zakai bound and the CRLB.

The ZZB integral over the prior window ``[0, Na]`` is evaluated on a fixed
uniform grid (composite Simpson by default).  The grid and its cosine/sine
tables are cached per ``(K, Na, n_points, rule)`` so repeated evaluations in
an optimisation loop reduce to matrix-vector products.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import special
from .ofdm import (
    DetectionScheme,
    DomainError,
    OfdmConfig,
    acf_coherent,
    acf_noncoherent,
    check_allocation,
    subcarrier_distances,
)

LAMBDA_CEIL = 1.0 - 1e-15


class SingularInformationError(DomainError):
    """The Fisher information of the allocation is zero."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Uniform-grid quadrature over the prior window.

    ``n_points`` counts sub-intervals, so the grid holds ``n_points + 1``
    nodes including both end points.
    """

    n_points: int = 4096
    rule: str = "simpson"

    def __post_init__(self):
        if self.rule not in ("simpson", "trapezoid"):
            raise DomainError(f"unknown quadrature rule {self.rule!r}")
        if self.n_points < 64:
            raise DomainError("n_points must be >= 64")
        if self.rule == "simpson" and self.n_points % 2:
            raise DomainError("simpson needs an even number of intervals")


@dataclass(frozen=True)
class BoundQuery:
    scheme: DetectionScheme
    gamma: float
    cfg: OfdmConfig = field(default_factory=OfdmConfig)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        object.__setattr__(self, "scheme", DetectionScheme.parse(self.scheme))
        if not self.gamma >= 0 or not math.isfinite(self.gamma):
            raise DomainError(f"gamma must be finite and >= 0, got {self.gamma}")

    def with_gamma(self, gamma: float) -> "BoundQuery":
        return BoundQuery(self.scheme, gamma, self.cfg, self.quad)


@dataclass(frozen=True)
class AbPair:
    """Arguments of the noncoherent error probability.

    ``a = sqrt(gamma/2 (1 - sqrt(1-lam)))`` and ``b = sqrt(gamma/2 (1 + sqrt(1-lam)))``
    so that ``a <= b``, ``a^2 + b^2 = gamma`` and ``ab = gamma sqrt(lam) / 2``.
    """

    a: float
    b: float

    @classmethod
    def from_lambda(cls, gamma: float, lam: float) -> "AbPair":
        lam = min(max(float(lam), 0.0), 1.0)
        s = math.sqrt(1.0 - lam)
        # 1 - s written as lam / (1 + s) to keep precision for small lam
        return cls(math.sqrt(0.5 * gamma * lam / (1 + s)), math.sqrt(0.5 * gamma * (1 + s)))


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes, ZZB weights and trigonometric tables for one window."""

    z: np.ndarray
    weights: np.ndarray  # includes z (Na - z) / Na; multiply by Ts^2
    cos: np.ndarray  # (n_nodes, K)
    sin: np.ndarray
    omc: np.ndarray  # 1 - cos, without cancellation near z = 0


def rule_weights(n_intervals: int, h: float, rule: str) -> np.ndarray:
    w = np.ones(n_intervals + 1)
    if rule == "trapezoid":
        w[0] = w[-1] = 0.5
        return w * h
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


@functools.lru_cache(maxsize=32)
def _grid(K: int, Na: float, n_points: int, rule: str) -> Grid:
    z = np.linspace(0.0, Na, n_points + 1)
    w = rule_weights(n_points, Na / n_points, rule) * z * (Na - z) / Na
    ph = 2 * np.pi * np.outer(z, subcarrier_distances(K)) / K
    g = Grid(z, w, np.cos(ph), np.sin(ph), 2 * np.sin(0.5 * ph) ** 2)
    for arr in (g.z, g.weights, g.cos, g.sin, g.omc):
        arr.setflags(write=False)
    return g


def quadrature_grid(cfg: OfdmConfig, quad: QuadratureSpec) -> Grid:
    return _grid(cfg.K, float(cfg.Na), quad.n_points, quad.rule)


# --------------------------------------------------------------------------
# error probabilities as functions of the ACF value


def pmin_coherent_from_gap(u, gamma: float):
    """Coherent error probability from ``u = 1 - A_C``."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    return special.gaussian_q(np.sqrt(gamma * u))


def pmin_noncoherent_from_gap(v, gamma: float):
    """Noncoherent error probability from ``v = 1 - A_N``."""
    v = np.asarray(v, dtype=float)
    s = np.sqrt(np.clip(v, 1.0 - LAMBDA_CEIL, 1.0))
    a = np.sqrt(0.5 * gamma * (1.0 - s))
    b = np.sqrt(0.5 * gamma * (1.0 + s))
    out = special.marcum_q1_excess(a, b)
    # the clamp keeps a < b; the exact peak value is the limit 1/2
    return np.where(v <= 0.0, 0.5, out)


def pmin_coherent_from_acf(ac, gamma: float):
    return pmin_coherent_from_gap(1.0 - np.asarray(ac, dtype=float), gamma)


def pmin_noncoherent_from_acf(an, gamma: float):
    return pmin_noncoherent_from_gap(1.0 - np.asarray(an, dtype=float), gamma)


def pmin_coherent(z, rho, q: BoundQuery):
    """``Q(sqrt(gamma (1 - A_C)))`` at delay ``z`` samples."""
    rho = check_allocation(rho, q.cfg.K)
    out = pmin_coherent_from_acf(acf_coherent(z, rho, q.cfg), q.gamma)
    return float(out) if np.ndim(out) == 0 else out


def pmin_noncoherent(z, rho, q: BoundQuery):
    """``Q1(a, b) - exp(-(a^2+b^2)/2) I0(ab) / 2`` at delay ``z`` samples."""
    rho = check_allocation(rho, q.cfg.K)
    out = pmin_noncoherent_from_acf(acf_noncoherent(z, rho, q.cfg), q.gamma)
    return float(out) if np.ndim(out) == 0 else out


def pmin(z, rho, q: BoundQuery):
    if q.scheme is DetectionScheme.COHERENT:
        return pmin_coherent(z, rho, q)
    return pmin_noncoherent(z, rho, q)


# --------------------------------------------------------------------------
# bounds


def acf_on_grid(rho, grid: Grid, scheme: DetectionScheme):
    """Coherent ACF, or the (cos-sum, sin-sum, A_N) triple for noncoherent."""
    c = grid.cos @ rho
    if scheme is DetectionScheme.COHERENT:
        return c
    s = grid.sin @ rho
    return c, s, c * c + s * s


def gaps_on_grid(rho, grid: Grid, scheme: DetectionScheme):
    """``1 - A`` on the grid, free of cancellation near the peak.

    Coherent: ``u = sum rho (1 - cos)``.  Noncoherent: returns the
    (cos-sum, sin-sum, ``1 - A_N``) triple, with
    ``1 - A_N = U (2 - U) - S^2`` and ``U = 1 - cos-sum``.  Both use
    ``sum rho = 1`` exactly, so rounding in the mass does not reach the gap.
    """
    u = grid.omc @ rho
    if scheme is DetectionScheme.COHERENT:
        return u
    s = grid.sin @ rho
    return 1.0 - u, s, np.maximum(u * (2.0 - u) - s * s, 0.0)


def pmin_on_grid(rho, q: BoundQuery, grid: Grid | None = None) -> np.ndarray:
    grid = grid or quadrature_grid(q.cfg, q.quad)
    if q.scheme is DetectionScheme.COHERENT:
        return pmin_coherent_from_gap(gaps_on_grid(rho, grid, q.scheme), q.gamma)
    _, _, v = gaps_on_grid(rho, grid, q.scheme)
    return pmin_noncoherent_from_gap(v, q.gamma)


def zzb(rho, q: BoundQuery) -> float:
    """Ziv-Zakai bound on the TOA error variance, in seconds squared."""
    rho = check_allocation(rho, q.cfg.K, unit_mass=True)
    grid = quadrature_grid(q.cfg, q.quad)
    if q.gamma == 0:
        p = np.full(grid.z.size, 0.5)
    else:
        p = pmin_on_grid(rho, q, grid)
    return q.cfg.Ts**2 * float(grid.weights @ p)


def second_moment(rho, K: int) -> float:
    """Power-weighted mean squared subcarrier distance, ``sum d^2 rho``."""
    d = subcarrier_distances(K)
    return float(np.asarray(rho, dtype=float) @ (d * d))


def crlb(rho, gamma: float, cfg: OfdmConfig) -> float:
    """Cramer-Rao bound on the TOA error variance, in seconds squared."""
    rho = check_allocation(rho, cfg.K)
    info = 8 * math.pi**2 * gamma * cfg.delta_f**2 * second_moment(rho, cfg.K)
    if not info > 0:
        raise SingularInformationError("zero Fisher information (gamma = 0 or all power at d = 0)")
    return 1.0 / info
