"""Closed-form lattice sums and the pair kernels built from them.

The three identities used everywhere are

    sum_n 1/(n+r)^2              = pi^2 / sin^2(pi r)
    sum_n e^{ins}/(n+r)^2        = e^{-i r s'} (pi^2/sin^2(pi r) + i pi s' cot(pi r) - pi |s'|)
    sum_{n!=0} e^{ins}/n^2       = s'^2/2 - pi |s'| + pi^2/3

with ``s' = reduce_2pi(s)`` in [-pi, pi).  Brute-force series versions live
next to the closed forms so tests and the verification suite can compare the
two directly.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import exp1

__all__ = [
    "PoleAtInteger",
    "POLE_GUARD",
    "reduce_2pi",
    "kernel_id0",
    "kernel_id",
    "kernel_id1",
    "dkernel_id_dr",
    "series_id0",
    "series_id",
    "series_id1",
    "potential_vjk",
    "dpotential_vjk",
    "coeff_cjk",
    "panel_moments",
    "coeff_wjk_djk",
    "w_from_moments",
    "dw_from_moments",
    "d_from_moments",
]

POLE_GUARD = 1e-12
TWO_PI = 2.0 * math.pi
PI2 = math.pi ** 2


class PoleAtInteger(ZeroDivisionError):
    """Kernel evaluated within the pole guard of an integer argument."""


def reduce_2pi(s):
    """Map ``s`` to ``s - 2 pi n`` in [-pi, pi)."""
    s = np.asarray(s, dtype=float)
    out = s - TWO_PI * np.floor((s + math.pi) / TWO_PI)
    # floating point can land exactly on +pi after the subtraction
    out = np.where(out >= math.pi, out - TWO_PI, out)
    return out[()] if out.ndim == 0 else out


def _guard(r):
    r = np.asarray(r, dtype=complex)
    d = np.abs(r - np.round(r.real))
    if np.any(d < POLE_GUARD):
        raise PoleAtInteger(f"argument within {POLE_GUARD:g} of an integer")
    return r


def kernel_id0(r):
    r = _guard(r)
    out = PI2 / np.sin(math.pi * r) ** 2
    return out[()] if out.ndim == 0 else out


def kernel_id(r, s):
    r = _guard(r)
    s2 = reduce_2pi(s)
    sn = np.sin(math.pi * r)
    cot = np.cos(math.pi * r) / sn
    out = np.exp(-1j * r * s2) * (PI2 / sn ** 2 + 1j * math.pi * s2 * cot - math.pi * np.abs(s2))
    return out[()] if np.ndim(out) == 0 else out


def dkernel_id_dr(r, s):
    """Derivative of ``kernel_id`` with respect to ``r``."""
    r = _guard(r)
    s2 = reduce_2pi(s)
    sn = np.sin(math.pi * r)
    cs = np.cos(math.pi * r)
    cot = cs / sn
    bracket = PI2 / sn ** 2 + 1j * math.pi * s2 * cot - math.pi * np.abs(s2)
    dbracket = -2.0 * math.pi ** 3 * cs / sn ** 3 - 1j * PI2 * s2 / sn ** 2
    out = np.exp(-1j * r * s2) * (dbracket - 1j * s2 * bracket)
    return out[()] if np.ndim(out) == 0 else out


def kernel_id1(s):
    s2 = reduce_2pi(s)
    out = 0.5 * s2 ** 2 - math.pi * np.abs(s2) + PI2 / 3.0
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# brute-force series with an integral tail

SERIES_TERMS = 100_000


def _tail(r: complex, s: float, nmax: int) -> complex:
    """sum_{n>nmax} e^{ins}/(n+r)^2 approximated by the integral from nmax+1/2."""
    b = nmax + 0.5 + r
    if s == 0.0:
        return 1.0 / b
    # int_b^inf e^{isu}/u^2 du = e^{isb}/b + i s E1(-i s b), then undo the shift u = x + r
    return np.exp(-1j * s * r) * (np.exp(1j * s * b) / b + 1j * s * exp1(-1j * s * b))


def series_id(r, s, nmax: int = SERIES_TERMS) -> complex:
    """Truncated ``sum_n e^{ins}/(n+r)^2`` over |n| <= nmax plus both tails."""
    r = complex(r)
    s = float(reduce_2pi(s))
    n = np.arange(-nmax, nmax + 1, dtype=float)
    core = np.sum(np.exp(1j * n * s) / (n + r) ** 2)
    return complex(core + _tail(r, s, nmax) + _tail(-r, -s, nmax))


def series_id0(r, nmax: int = SERIES_TERMS) -> complex:
    return series_id(r, 0.0, nmax)


def series_id1(s, nmax: int = SERIES_TERMS) -> float:
    s = float(reduce_2pi(s))
    n = np.arange(1, nmax + 1, dtype=float)
    core = 2.0 * np.sum(np.cos(n * s) / n ** 2)
    tail = 2.0 * _tail(0.0, s, nmax).real
    return float(core + tail)


# ---------------------------------------------------------------------------
# site kernels

def potential_vjk(r, x_jk, g):
    """Off-diagonal pair kernel ``(1/4pi^2) sum_n e^{in x_jk}/(n + g r)^2``."""
    return kernel_id(g * np.asarray(r, dtype=complex), x_jk) / (4.0 * PI2)


def dpotential_vjk(r, x_jk, g):
    return g * dkernel_id_dr(g * np.asarray(r, dtype=complex), x_jk) / (4.0 * PI2)


def coeff_cjk(x_jk):
    """Diagonal pair coefficient ``x^2/8pi^2 - |x|/4pi + 1/12`` with x reduced."""
    x = reduce_2pi(x_jk)
    return x ** 2 / (8.0 * PI2) - np.abs(x) / (4.0 * math.pi) + 1.0 / 12.0


# ---------------------------------------------------------------------------
# panel-averaged kernels for piecewise charges

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def _gauss(f, a, b):
    if b <= a:
        return 0.0 * f(np.array([a]))[..., 0]
    x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return 0.5 * (b - a) * (f(x) @ _GL_W)


def _inner(x: float, c: float, d: float) -> np.ndarray:
    """Moments over y in [c, d] at fixed x, split where x - y crosses -pi, 0, pi.

    Returns shape (3, 4): branch n = -1, 0, 1 by (1, s, s^2, |s|) with
    s = x - y - 2 pi n the reduced difference.
    """
    out = np.zeros((3, 4))
    cuts = sorted({c, d, *(v for v in (x - math.pi, x, x + math.pi) if c < v < d)})
    for a, b in zip(cuts, cuts[1:]):
        mid = x - 0.5 * (a + b)
        n = int(math.floor((mid + math.pi) / TWO_PI))

        def f(y, n=n):
            s = x - y - TWO_PI * n
            return np.array([np.ones_like(s), s, s * s, np.abs(s)])

        out[n + 1] += _gauss(f, a, b)
    return out


def panel_moments(a0: float, a1: float, b0: float, b1: float) -> np.ndarray:
    """Averages over [a0,a1] x [b0,b1] of (1, s, s^2, |s|) on each branch.

    The integrand is piecewise polynomial of degree <= 3 after splitting, so the
    Gauss rules used here are exact up to roundoff.
    """
    la, lb = a1 - a0, b1 - b0
    cuts = {a0, a1}
    for y in (b0, b1):
        for shift in (-math.pi, 0.0, math.pi):
            if a0 < y + shift < a1:
                cuts.add(y + shift)
    cuts = sorted(cuts)
    tot = np.zeros((3, 4))
    for u, v in zip(cuts, cuts[1:]):
        x = 0.5 * (v - u) * _GL_X + 0.5 * (u + v)
        vals = np.array([_inner(xi, b0, b1) for xi in x])
        tot += 0.5 * (v - u) * np.tensordot(_GL_W, vals, axes=1)
    return tot / (la * lb)


def w_from_moments(mom: np.ndarray, r, g):
    """Panel-averaged off-diagonal kernel from ``panel_moments`` output."""
    r = np.asarray(r, dtype=complex)
    z = _guard(g * r)
    sn = np.sin(math.pi * z)
    cot = np.cos(math.pi * z) / sn
    out = 0.0
    for k, n in enumerate((-1, 0, 1)):
        a, m1, _, ab = mom[k]
        out = out + np.exp(TWO_PI * 1j * n * z) * (a / sn ** 2 + 1j * m1 * cot / math.pi - ab / math.pi)
    return 0.25 * out


def dw_from_moments(mom: np.ndarray, r, g):
    r = np.asarray(r, dtype=complex)
    z = _guard(g * r)
    sn = np.sin(math.pi * z)
    cs = np.cos(math.pi * z)
    cot = cs / sn
    out = 0.0
    for k, n in enumerate((-1, 0, 1)):
        a, m1, _, ab = mom[k]
        br = a / sn ** 2 + 1j * m1 * cot / math.pi - ab / math.pi
        dbr = -2.0 * math.pi * a * cs / sn ** 3 - 1j * m1 / sn ** 2
        out = out + np.exp(TWO_PI * 1j * n * z) * (TWO_PI * 1j * n * br + dbr)
    return 0.25 * g * out


def d_from_moments(mom: np.ndarray) -> float:
    tot = mom.sum(axis=0)
    return float(tot[2] / (8.0 * PI2) - tot[3] / (4.0 * math.pi) + tot[0] / 12.0)


def coeff_wjk_djk(j: int, k: int, breakpoints, g, r):
    """Return ``(w_jk(r), d_jk)`` for panels j, k (1-based, as in the panel list).

    Panel j is [breakpoints[j-1], breakpoints[j]].
    """
    b = [float(x) for x in breakpoints]
    mom = panel_moments(b[j - 1], b[j], b[k - 1], b[k])
    return complex(w_from_moments(mom, r, g)), d_from_moments(mom)
