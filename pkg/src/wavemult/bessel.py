"""Bessel functions of integer and half-integer order.

Power series for small arguments, Hankel's large-argument expansion beyond.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

#: Arguments at or below this use the power series.
SERIES_CUTOFF = 12.0


def _check_order(nu: float) -> float:
    nu = float(nu)
    if nu < -0.5 or not float(2 * nu).is_integer():
        raise ValidationError(f"order nu={nu} must be an integer or half-integer >= -1/2")
    return nu


def series_scaled(nu: float, s, terms: int | None = None):
    """``J_nu(s) s^{-nu}`` from the power series (entire in ``s``)."""
    nu = _check_order(nu)
    s = np.asarray(s, dtype=float)
    x = 0.25 * s * s
    smax = float(np.max(s)) if s.size else 0.0
    if terms is None:
        terms = int(2 * smax + 30)
    # term_k = (-x)^k / (k! Gamma(k + nu + 1)), times 2^{-nu}
    term = np.full_like(s, 2.0**-nu / math.gamma(nu + 1.0))
    total = term.copy()
    for k in range(1, terms):
        term = term * (-x) / (k * (k + nu))
        total += term
    return total


def hankel_coefficients(nu: float, count: int) -> np.ndarray:
    """``a_k(nu) = prod_{l<=k} (4 nu^2 - (2l - 1)^2) / (k! 8^k)``."""
    a = np.empty(count)
    a[0] = 1.0
    for k in range(1, count):
        a[k] = a[k - 1] * (4 * nu * nu - (2 * k - 1) ** 2) / (8.0 * k)
    return a


def hankel_pq(nu: float, s, terms: int | None = None):
    """``P(s) + i Q(s) = sum_k i^k a_k / s^k``.

    With ``terms=None`` the sum is truncated before its smallest term, which is
    optimal for the divergent series; half-integer orders terminate exactly.
    """
    nu = _check_order(nu)
    s = np.asarray(s, dtype=float)
    count = terms if terms is not None else 60
    a = hankel_coefficients(nu, count)
    total = np.ones_like(s, dtype=complex)
    if terms is not None:
        for k in range(1, count):
            total = total + (1j**k) * a[k] * s ** (-float(k))
        return total
    term = np.ones_like(s, dtype=complex)
    active = np.ones(s.shape, dtype=bool)
    prev = np.abs(term)
    for k in range(1, count):
        if a[k] == 0:
            break
        new = term * 1j * (a[k] / a[k - 1]) / s
        size = np.abs(new)
        active &= (size < prev) & (size > 1e-17 * np.abs(total))
        total = np.where(active, total + new, total)
        term, prev = new, size
        if not active.any():
            break
    return total


def bessel_asymptotic(nu: float, s):
    """``J_nu(s)`` for large ``s`` from the Hankel expansion."""
    nu = _check_order(nu)
    s = np.asarray(s, dtype=float)
    pq = hankel_pq(nu, s)
    chi = s - 0.5 * nu * np.pi - 0.25 * np.pi
    return np.sqrt(2.0 / (np.pi * s)) * (pq.real * np.cos(chi) - pq.imag * np.sin(chi))


def bessel_j(nu: float, s):
    """``J_nu(s)`` for ``s >= 0``; series up to 12, asymptotic expansion beyond."""
    nu = _check_order(nu)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValidationError("bessel_j requires finite s >= 0")
    out = np.empty_like(s)
    small = s <= SERIES_CUTOFF
    if np.any(small):
        ss = s[small]
        with np.errstate(divide="ignore"):
            out[small] = series_scaled(nu, ss) * np.where(ss > 0, ss, 1.0) ** nu
        if nu == -0.5:
            out[small & (s == 0)] = np.inf
        elif nu > 0:
            out[small & (s == 0)] = 0.0
    if np.any(~small):
        out[~small] = bessel_asymptotic(nu, s[~small])
    return out if out.ndim else float(out)


def bessel_scaled(nu: float, s):
    """``J_nu(s) s^{-nu}``, finite at ``s = 0`` for every supported order."""
    nu = _check_order(nu)
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s <= SERIES_CUTOFF
    if np.any(small):
        out[small] = series_scaled(nu, s[small])
    if np.any(~small):
        big = s[~small]
        out[~small] = bessel_asymptotic(nu, big) * big ** (-nu)
    return out
