"""Gaussian Q, modified Bessel I0/I1 and the first-order Marcum Q function.

The Bessel functions are evaluated by their power series below ``x = 25`` and
by the Hankel asymptotic expansion above it.  The Marcum Q function sums the
Neumann series ``sum_n (a/b)^n I_n(ab)`` with all Bessel orders produced by one
backward (Miller) recurrence, normalised through ``I_0 + 2 sum_n I_n = e^x``.
Everything is carried in exponentially scaled form so arguments of several
thousand do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import erfc

from .ofdm import DomainError

_SERIES_LIMIT = 25.0
_RESCALE = 1e200


@dataclass(frozen=True)
class AccuracySpec:
    abs_tol: float = 1e-12
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")


DEFAULT_ACCURACY = AccuracySpec()


def gaussian_q(x):
    """Tail probability of the standard normal law, ``Q(x) = erfc(x/sqrt2)/2``."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# modified Bessel functions of the first kind, orders 0 and 1


@numba.njit(cache=True)
def _ive_scalar(n, x):
    # exp(-x) * I_n(x) for n in {0, 1}, x >= 0
    if x <= _SERIES_LIMIT:
        q = 0.25 * x * x
        if n == 0:
            term = 1.0
        else:
            term = 0.5 * x
        total = term
        l = 0
        while True:
            l += 1
            term *= q / (l * (l + n))
            total += term
            if term <= 1e-17 * total:
                break
        return total * math.exp(-x)
    mu = 4.0 * n * n
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if abs(nxt) > abs(term):
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


@numba.vectorize(["float64(float64)"], cache=True)
def i0e(x):
    """``exp(-x) I0(x)`` for ``x >= 0``."""
    return _ive_scalar(0, x)


@numba.vectorize(["float64(float64)"], cache=True)
def i1e(x):
    """``exp(-x) I1(x)`` for ``x >= 0``."""
    return _ive_scalar(1, x)


def bessel_i(n: int, x, scaled: bool = False):
    """Modified Bessel function ``I_n(x)`` for ``n`` in {0, 1} and ``x >= 0``.

    With ``scaled=True`` returns ``exp(-x) I_n(x)``, which stays finite for any
    finite ``x``; the unscaled value overflows above ``x ~ 713``.
    """
    if n not in (0, 1):
        raise DomainError(f"order must be 0 or 1, got {n}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise DomainError("bessel_i requires x >= 0")
    out = i0e(xa) if n == 0 else i1e(xa)
    if not scaled:
        with np.errstate(over="ignore"):
            out = out * np.exp(xa)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# Marcum Q


def _depth(acc: AccuracySpec) -> float:
    # I_n(x)/I_0(x) ~ exp(-n^2 / 2x): orders past sqrt(depth * x) are below
    # abs_tol with three digits to spare
    return 2.0 * math.log(1e3 / acc.abs_tol)


@numba.njit(cache=True)
def _neumann(x, r, depth, max_terms):
    """Return (S, y0) with S = sum_{n>=0} r^n e^{-x} I_n(x) and y0 = e^{-x} I_0(x).

    ``0 <= r <= 1`` and ``x > 0``.
    """
    if x < 1e-8:
        # leading terms of the series; the recurrence below would overflow
        e = math.exp(-x)
        return e * (1.0 + 0.5 * r * x), e
    m = min(24 + int(math.sqrt(depth * x + 1.0)), max_terms)
    y_next = 0.0
    y = 1e-300
    horner = y
    norm = 2.0 * y
    for n in range(m, 0, -1):
        y_prev = y_next + (2.0 * n / x) * y
        y_next = y
        y = y_prev
        horner = y + r * horner
        if n > 1:
            norm += 2.0 * y
        else:
            norm += y
        if y > _RESCALE:
            y /= _RESCALE
            y_next /= _RESCALE
            horner /= _RESCALE
            norm /= _RESCALE
    return horner / norm, y / norm


@numba.njit(cache=True)
def _marcum_q1_scalar(a, b, depth, max_terms):
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    x = a * b
    if a <= b:
        s, _ = _neumann(x, a / b, depth, max_terms)
        return math.exp(-0.5 * (b - a) ** 2) * s
    s, y0 = _neumann(x, b / a, depth, max_terms)
    return 1.0 - math.exp(-0.5 * (a - b) ** 2) * (s - y0)


@numba.vectorize(["float64(float64, float64, float64, int64)"], cache=True)
def _marcum_q1(a, b, depth, max_terms):
    return _marcum_q1_scalar(a, b, depth, max_terms)


@numba.njit(cache=True)
def _marcum_excess_scalar(a, b, depth, max_terms):
    # Q1(a, b) - exp(-(a^2+b^2)/2) I0(ab) / 2 for 0 <= a <= b
    if b == 0.0:
        return 0.5
    if a == 0.0:
        return 0.5 * math.exp(-0.5 * b * b)
    s, y0 = _neumann(a * b, a / b, depth, max_terms)
    return math.exp(-0.5 * (b - a) ** 2) * (s - 0.5 * y0)


@numba.vectorize(["float64(float64, float64, float64, int64)"], cache=True)
def _marcum_excess(a, b, depth, max_terms):
    return _marcum_excess_scalar(a, b, depth, max_terms)


def _check_nonneg(*args):
    arrs = [np.asarray(v, dtype=float) for v in args]
    for v in arrs:
        if np.any(v < 0) or np.any(~np.isfinite(v)):
            raise DomainError("Marcum Q arguments must be finite and >= 0")
    return arrs


def marcum_q1(a, b, acc: AccuracySpec = DEFAULT_ACCURACY):
    """First-order Marcum Q function ``Q1(a, b)`` for ``a, b >= 0``."""
    a, b = _check_nonneg(a, b)
    out = _marcum_q1(a, b, _depth(acc), acc.max_terms)
    return float(out) if np.ndim(out) == 0 else out


def marcum_q1_excess(a, b, acc: AccuracySpec = DEFAULT_ACCURACY):
    """``Q1(a, b) - exp(-(a^2+b^2)/2) I0(ab) / 2`` for ``0 <= a <= b``.

    This is the noncoherent binary-detection error probability written in
    terms of the (a, b) pair.  It is summed as a series of positive terms, so
    it carries relative accuracy even where it is tiny.
    """
    a, b = _check_nonneg(a, b)
    if np.any(a > b * (1 + 1e-12)):
        raise DomainError("marcum_q1_excess requires a <= b")
    out = _marcum_excess(np.minimum(a, b), b, _depth(acc), acc.max_terms)
    return float(out) if np.ndim(out) == 0 else out
