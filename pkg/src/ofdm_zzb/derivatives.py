"""Reduced parameterisation of the simplex and analytic ZZB derivatives.

An allocation is written ``rho = F rho_t + e0`` with ``rho_t`` the powers of
subcarriers ``1..K-1`` and ``rho[0] = 1 - sum(rho_t)``.  Derivatives with
respect to ``rho_t`` then contain the factors ``cos(2 pi z d[n+1] / K) - 1``
which vanish at ``z = 0`` and keep the ZZB derivative integrals finite.

Coherent:  dP/drho_t[n]  = c(u) (cos_n - 1),          u = 1 - A_C
           d2P/drho_t2   = h(u) (cos - 1)(cos - 1)^T
Noncoherent: dP/drho_t[n] = (dQ1/da da/dlam + dQ1/db db/dlam + dB/dlam) dlam/drho_t[n]
with ``B = -exp(-gamma/2) I0(ab) / 2`` and ``lam = A_N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import (
    BoundQuery,
    Grid,
    gaps_on_grid,
    pmin_coherent_from_gap,
    pmin_noncoherent_from_gap,
    quadrature_grid,
)
from .ofdm import DetectionScheme, DomainError, subcarrier_distances
from .special import i0e, i1e

COHERENT_GUARD = 1e-14
LAMBDA_FLOOR = 1e-12
LAMBDA_CEIL = 1.0 - 1e-12


@dataclass
class GradientRecord:
    value: float
    grad: np.ndarray
    hessian: np.ndarray | None = None


def check_reduced(rt) -> np.ndarray:
    rt = np.asarray(rt, dtype=float)
    if rt.ndim != 1:
        raise DomainError("reduced allocation must be a 1-D vector")
    if np.any(rt < 0) or not np.all(np.isfinite(rt)):
        raise DomainError("reduced allocation entries must be finite and >= 0")
    if rt.sum() > 1 + 1e-12:
        raise DomainError(f"reduced allocation mass {rt.sum()!r} exceeds 1")
    return rt


def expand(rt) -> np.ndarray:
    """Full allocation ``F rho_t + e0`` (sums to one)."""
    rt = check_reduced(rt)
    return np.concatenate(([max(1.0 - rt.sum(), 0.0)], rt))


def reduce(rho) -> np.ndarray:
    return np.array(rho, dtype=float)[1:]


# --------------------------------------------------------------------------
# scalar factors, as functions of the ACF value


def coherent_slope(ac, gamma: float) -> np.ndarray:
    """``dPmin/dA_C`` with the peak singularity replaced by its zero limit."""
    return coherent_slope_gap(1.0 - np.asarray(ac, dtype=float), gamma)


def coherent_curvature(ac, gamma: float) -> np.ndarray:
    """``d2Pmin/dA_C2``; multiplies the outer product of ``cos - 1``."""
    return coherent_curvature_gap(1.0 - np.asarray(ac, dtype=float), gamma)


def coherent_slope_gap(u, gamma: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    live = u >= COHERENT_GUARD
    us = np.where(live, u, 1.0)
    out = math.sqrt(gamma) / (2 * math.sqrt(2 * math.pi)) * np.exp(-0.5 * gamma * us) / np.sqrt(us)
    return np.where(live, out, 0.0)


def coherent_curvature_gap(u, gamma: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    live = u >= COHERENT_GUARD
    us = np.where(live, u, 1.0)
    out = (
        math.sqrt(gamma)
        / (4 * math.sqrt(2 * math.pi))
        * np.exp(-0.5 * gamma * us)
        / np.sqrt(us)
        * (gamma + 1.0 / us)
    )
    return np.where(live, out, 0.0)


def noncoherent_slope_terms(an, gamma: float, gap=None):
    """Marcum-Q chain term and Bessel term of ``dPmin/dA_N``.

    Both are carried with exponentially scaled Bessel functions:
    ``exp(-gamma/2) I_n(ab) = exp(-(b-a)^2/2) ive_n(ab)``.  ``gap`` is an
    accurate ``1 - A_N`` when the caller has one.
    """
    lam = np.clip(np.asarray(an, dtype=float), LAMBDA_FLOOR, LAMBDA_CEIL)
    if gap is None:
        gap = 1.0 - lam
    s = np.sqrt(np.clip(gap, 1.0 - LAMBDA_CEIL, 1.0 - LAMBDA_FLOOR))
    a = np.sqrt(0.5 * gamma * (1.0 - s))
    b = np.sqrt(0.5 * gamma * (1.0 + s))
    x = a * b
    scale = np.exp(-0.5 * (b - a) ** 2)
    e0 = scale * i0e(x)  # exp(-gamma/2) I0(ab)
    e1 = scale * i1e(x)
    dq_da = b * e1
    dq_db = -b * e0
    k = math.sqrt(gamma) / (4 * math.sqrt(2))
    da = k / (s * np.sqrt(1.0 - s))
    db = -k / (s * np.sqrt(1.0 + s))
    marcum = dq_da * da + dq_db * db
    bessel = -0.5 * e1 * gamma / (4 * np.sqrt(lam))
    return marcum, bessel


def noncoherent_slope(an, gamma: float, gap=None) -> np.ndarray:
    marcum, bessel = noncoherent_slope_terms(an, gamma, gap)
    return marcum + bessel


# --------------------------------------------------------------------------
# pointwise derivatives


def _tables(z, K):
    d = subcarrier_distances(K)
    ph = 2 * np.pi * np.asarray(z, dtype=float)[..., None] * d / K
    return np.cos(ph), np.sin(ph)


def grad_pmin_coherent(z: float, rt, gamma: float) -> np.ndarray:
    """Gradient of the coherent error probability at delay ``z`` w.r.t. ``rho_t``."""
    rho = expand(rt)
    c, _ = _tables(z, rho.size)
    return coherent_slope(c @ rho, gamma) * (c[1:] - 1.0)


def hess_pmin_coherent(z: float, rt, gamma: float) -> np.ndarray:
    rho = expand(rt)
    c, _ = _tables(z, rho.size)
    v = c[1:] - 1.0
    return coherent_curvature(c @ rho, gamma) * np.outer(v, v)


def dacf_noncoherent(z: float, rt) -> np.ndarray:
    """Gradient of ``A_N(z, f(rho_t))`` w.r.t. ``rho_t``."""
    rho = expand(rt)
    c, s = _tables(z, rho.size)
    csum, ssum = c @ rho, s @ rho
    return 2 * csum * (c[1:] - 1.0) + 2 * ssum * s[1:]


def grad_pmin_noncoherent(z: float, rt, gamma: float) -> np.ndarray:
    rho = expand(rt)
    if gamma == 0:
        return np.zeros(rho.size - 1)
    c, s = _tables(z, rho.size)
    csum, ssum = c @ rho, s @ rho
    slope = noncoherent_slope(csum * csum + ssum * ssum, gamma)
    return slope * (2 * csum * (c[1:] - 1.0) + 2 * ssum * s[1:])


# --------------------------------------------------------------------------
# integrated derivatives


def zzb_and_grad(rho, q: BoundQuery, grid: Grid | None = None, hessian: bool = False):
    """ZZB (seconds^2) and its gradient w.r.t. ``rho_t`` for a full allocation.

    The gradient is exact for the discretised objective, i.e. it uses the same
    nodes and weights as :func:`bounds.zzb`.
    """
    grid = grid or quadrature_grid(q.cfg, q.quad)
    ts2 = q.cfg.Ts**2
    n = q.cfg.K - 1
    if q.gamma == 0:
        value = ts2 * 0.5 * float(grid.weights.sum())
        return value, np.zeros(n), (np.zeros((n, n)) if hessian else None)
    omc = grid.omc[:, 1:]
    if q.scheme is DetectionScheme.COHERENT:
        u = gaps_on_grid(rho, grid, q.scheme)
        value = ts2 * float(grid.weights @ pmin_coherent_from_gap(u, q.gamma))
        g = -ts2 * (omc.T @ (grid.weights * coherent_slope_gap(u, q.gamma)))
        h = None
        if hessian:
            wc = ts2 * grid.weights * coherent_curvature_gap(u, q.gamma)
            h = omc.T @ (wc[:, None] * omc)
            h = 0.5 * (h + h.T)
        return value, g, h
    if hessian:
        raise DomainError("no analytic Hessian for the noncoherent scheme")
    csum, ssum, gap = gaps_on_grid(rho, grid, q.scheme)
    value = ts2 * float(grid.weights @ pmin_noncoherent_from_gap(gap, q.gamma))
    ws = ts2 * grid.weights * noncoherent_slope(csum * csum + ssum * ssum, q.gamma, gap)
    g = grid.sin[:, 1:].T @ (2 * ws * ssum) - omc.T @ (2 * ws * csum)
    return value, g, None


def grad_zzb(rt, q: BoundQuery, hessian: bool = False) -> GradientRecord:
    """Value, gradient and (coherent only) Hessian of the ZZB at ``f(rt)``."""
    rho = expand(rt)
    if rho.size != q.cfg.K:
        raise DomainError(f"reduced allocation needs {q.cfg.K - 1} entries")
    value, g, h = zzb_and_grad(rho, q, hessian=hessian)
    return GradientRecord(value, g, h)


def hess_zzb(rt, q: BoundQuery) -> np.ndarray:
    if q.scheme is not DetectionScheme.COHERENT:
        raise DomainError("no analytic Hessian for the noncoherent scheme")
    return grad_zzb(rt, q, hessian=True).hessian
