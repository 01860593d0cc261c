"""Scalar mathematics of the planar system -u'' + u = |u|^{p-2} u.

The potential is f(x) = x^2/2 - |x|^p/p and the first integral is
F(u, u') = -u'^2/2 + f(u).  Everything here is a pure function of an
immutable :class:`Nonlinearity`.

Differences of f close to its maximum at x = 1 cancel badly when computed
naively, so the module exposes :func:`pot_diff` and :func:`gap`, which keep
full relative accuracy there.  Quadrature and the inverse branches are
built on top of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import binom

P_MIN = 2.0
P_MAX = 10.0

# number of terms kept in the binomial tail and in the series around x = 1
_TAIL_TERMS = 28
_SERIES_TERMS = 22
# |t - 1| below which coefficient functions switch to their power series
_SERIES_RADIUS = 0.05


class DomainError(ValueError):
    """An argument lies outside the domain of a scalar function."""


class DegeneratePointError(ValueError):
    """The function has a removable zero at the requested point."""


@dataclass(frozen=True)
class Nonlinearity:
    """Exponent p of the power nonlinearity plus derived constants."""

    p: float
    apex: float = field(init=False)
    fmax: float = field(init=False)
    inflection: float = field(init=False)

    def __post_init__(self) -> None:
        p = float(self.p)
        if not math.isfinite(p) or not (P_MIN < p <= P_MAX):
            raise DomainError(f"exponent p must lie in ({P_MIN}, {P_MAX}], got {self.p!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "apex", (p / 2.0) ** (1.0 / (p - 2.0)))
        object.__setattr__(self, "fmax", (p - 2.0) / (2.0 * p))
        object.__setattr__(self, "inflection", (1.0 / (p - 1.0)) ** (1.0 / (p - 2.0)))

    @property
    def k(self) -> float:
        """Decay rate of the soliton, (p - 2)/2."""
        return 0.5 * (self.p - 2.0)

    @cached_property
    def _tail_coeffs(self) -> np.ndarray:
        # binom(p, j) for j = 3, 4, ...
        return binom(self.p, np.arange(3, 3 + _TAIL_TERMS))

    @cached_property
    def _series(self) -> dict:
        return _near_one_series(self.p)


@dataclass(frozen=True)
class PhasePoint:
    """A point (u, u') of the phase plane."""

    u: float
    slope: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.slope)):
            raise DomainError("phase point coordinates must be finite")


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def potential(nl: Nonlinearity, x):
    """f(x) = x^2/2 - |x|^p/p."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(0.5 * x * x - np.abs(x) ** nl.p / nl.p)


def potential_derivative(nl: Nonlinearity, x, order: int):
    """Derivative of f of order 1, 2 or 3."""
    if order not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order!r}")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    p = nl.p
    with np.errstate(divide="ignore", invalid="ignore"):
        if order == 1:
            # x - x^{p-1} = -x expm1((p-2) log x) keeps relative accuracy near 1
            safe = np.where(ax > 0, ax, 1.0)
            out = np.where(ax > 0, -safe * np.expm1((p - 2.0) * np.log(safe)), 0.0)
            out = np.sign(x) * out
        elif order == 2:
            out = 1.0 - (p - 1.0) * ax ** (p - 2.0)
        else:
            out = -(p - 1.0) * (p - 2.0) * ax ** (p - 3.0) * np.sign(x)
    return _scalar_or_array(out)


def hamiltonian(nl: Nonlinearity, pt: PhasePoint) -> float:
    """F(u, u') = -u'^2/2 + f(u)."""
    return -0.5 * pt.slope * pt.slope + potential(nl, pt.u)


def pot_diff(nl: Nonlinearity, y, d):
    """f(y + d) - f(y) without cancellation for small |d| relative to y > 0."""
    y, d = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(d, dtype=float))
    out = np.empty(y.shape)
    ser = (y > 0) & (np.abs(d) <= 0.1 * y)
    direct = ~ser
    if np.any(direct):
        yd, dd = y[direct], d[direct]
        out[direct] = potential(nl, yd + dd) - potential(nl, yd)
    if np.any(ser):
        ys, ds = y[ser], d[ser]
        r = ds / ys
        tail = np.zeros_like(r)
        for c in nl._tail_coeffs[::-1]:
            tail = (tail + c) * r
        tail *= r * r
        f1 = potential_derivative(nl, ys, 1)
        f2 = potential_derivative(nl, ys, 2)
        out[ser] = ds * f1 + 0.5 * ds * ds * f2 - ys**nl.p / nl.p * tail
    return _scalar_or_array(out)


def gap(nl: Nonlinearity, t):
    """f(1) - f(t), accurate to full relative precision near t = 1."""
    t = np.asarray(t, dtype=float)
    return _scalar_or_array(-np.asarray(pot_diff(nl, 1.0, t - 1.0)))


def _brent(fun, a: float, b: float) -> float:
    return brentq(fun, a, b, xtol=1e-300, rtol=8.9e-16, maxiter=400)


def _inv_low(nl: Nonlinearity, c: float, g: float) -> float:
    """t in [0, 1] with f(t) = c, where g = f(1) - c is supplied accurately."""
    if c <= 0.0:
        return 0.0
    if g <= 0.0:
        return 1.0
    p = nl.p
    if c <= 0.5 * nl.fmax:
        target = math.sqrt(2.0 * c)
        fun = lambda t: t * math.sqrt(1.0 - 2.0 * t ** (p - 2.0) / p) - target
        return _brent(fun, 0.0, 1.0)
    target = math.sqrt(g)
    fun = lambda t: math.sqrt(max(gap(nl, t), 0.0)) - target
    return _brent(fun, 0.0, 1.0)


def _inv_high(nl: Nonlinearity, c: float, g: float) -> float:
    """t >= 1 with f(t) = c, where g = f(1) - c is supplied accurately."""
    if g <= 0.0:
        return 1.0
    if g <= 0.5 * nl.fmax:
        target = math.sqrt(g)
        fun = lambda t: math.sqrt(max(gap(nl, t), 0.0)) - target
        return _brent(fun, 1.0, nl.apex)
    if c == 0.0:
        return nl.apex
    hi = nl.apex
    while potential(nl, hi) > c:
        hi *= 2.0
    fun = lambda t: potential(nl, t) - c
    return _brent(fun, 1.0, hi)


def _snap_to_max(nl: Nonlinearity, c: float) -> float:
    # f(1) evaluated in floating point can land a few ulps above fmax
    if nl.fmax < c <= nl.fmax * (1.0 + 8.0 * np.finfo(float).eps):
        return nl.fmax
    return c


def potential_inverse_low(nl: Nonlinearity, c: float) -> float:
    """Inverse of f restricted to [0, 1]."""
    c = _snap_to_max(nl, float(c))
    if not (0.0 <= c <= nl.fmax):
        raise DomainError(f"level {c!r} outside [0, {nl.fmax!r}]")
    return _inv_low(nl, c, nl.fmax - c)


def potential_inverse_high(nl: Nonlinearity, c: float) -> float:
    """Inverse of f restricted to [1, inf)."""
    c = _snap_to_max(nl, float(c))
    if not (c <= nl.fmax) or not math.isfinite(c):
        raise DomainError(f"level {c!r} exceeds the maximum {nl.fmax!r} of f")
    return _inv_high(nl, c, nl.fmax - c)


def soliton(nl: Nonlinearity, x):
    """phi(x) = apex * sech^{2/(p-2)}((p-2) x / 2)."""
    ax = np.abs(np.asarray(x, dtype=float)) * nl.k
    e = np.exp(-2.0 * ax)
    # log sech(a) = log 2 - a - log1p(e^{-2a})
    log_sech = math.log(2.0) - ax - np.log1p(e)
    return _scalar_or_array(nl.apex * np.exp(log_sech * (2.0 / (nl.p - 2.0))))


def soliton_derivative(nl: Nonlinearity, x):
    """phi'(x) = -phi(x) tanh((p-2) x / 2)."""
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(-np.asarray(soliton(nl, x)) * np.tanh(nl.k * x))


def soliton_inverse(nl: Nonlinearity, z: float) -> float:
    """The unique y >= 0 with phi(y) = z."""
    z = float(z)
    if not (0.0 < z <= nl.apex):
        raise DomainError(f"soliton value {z!r} outside (0, {nl.apex!r}]")
    k = nl.k
    a = -2.0 * k * math.log(z / nl.apex)  # = log(1/sech^2(k y)) >= 0
    if a > 60.0:
        return (0.5 * a + math.log(2.0)) / k
    return math.asinh(math.sqrt(math.expm1(a))) / k


# ---------------------------------------------------------------------------
# coefficient functions used by the derivative of the length functions


def _series_inv(a: np.ndarray, n: int) -> np.ndarray:
    b = np.zeros(n)
    b[0] = 1.0 / a[0]
    for k in range(1, n):
        b[k] = -np.dot(a[1 : k + 1], b[k - 1 :: -1][:k]) / a[0]
    return b


def _near_one_series(p: float) -> dict:
    """Power series in s = t - 1 of A(t) and of (2A/f')'(t)."""
    n = _SERIES_TERMS
    m = n + 3
    kk = np.arange(m)
    a = np.zeros(m)  # f(1 + s) - f(1) = sum a_k s^k
    a[2] = -(p - 2.0) / 2.0
    a[3:] = -binom(p, kk[3:]) / p
    P = a[2:][:n]  # (f - f1)/s^2
    Q = (kk * a)[2:][:n]  # f'/s
    R = (kk * (kk - 1) * a)[2:][:n]  # f''
    PR = np.convolve(P, R)[:n]
    Qinv = _series_inv(Q, n)
    Q2inv = np.convolve(Qinv, Qinv)[:n]
    A = -np.convolve(PR, Q2inv)[:n]
    A[0] += 0.5
    # A(1) = 0, so 2A/f' = 2 (A/s)/Q
    A1 = A[1:]
    twoA_fp = 2.0 * np.convolve(A1, Qinv[: n - 1])[: n - 1]
    deriv = twoA_fp[1:] * np.arange(1, n - 1)
    return {"A": A, "g_fp4": deriv}


def _horner(coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    for c in coeffs[::-1]:
        out = out * s + c
    return out


def _check_positive(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("argument must be positive")
    return t


def coeff_A(nl: Nonlinearity, t):
    """A(t) = 1/2 - (f(t) - f(1)) f''(t) / f'(t)^2, continuously extended by A(1) = 0."""
    t = _check_positive(t)
    s = t - 1.0
    near = np.abs(s) < _SERIES_RADIUS
    out = np.empty(t.shape)
    if np.any(near):
        out[near] = _horner(nl._series["A"], s[near])
    far = ~near
    if np.any(far):
        tf = t[far]
        fp = potential_derivative(nl, tf, 1)
        out[far] = 0.5 + gap(nl, tf) * potential_derivative(nl, tf, 2) / (fp * fp)
    return _scalar_or_array(out)


def coeff_g(nl: Nonlinearity, t):
    """g(t) = -3 f'' f'^2 + 6 (f - f(1)) f''^2 - 2 (f - f(1)) f''' f'."""
    t = _check_positive(t)
    if np.any(np.abs(t - 1.0) <= 1e-9):
        raise DegeneratePointError("g has a removable zero at t = 1")
    return _scalar_or_array(_coeff_g_raw(nl, t))


def _coeff_g_raw(nl: Nonlinearity, t: np.ndarray) -> np.ndarray:
    f1 = potential_derivative(nl, t, 1)
    f2 = potential_derivative(nl, t, 2)
    f3 = potential_derivative(nl, t, 3)
    df = -np.asarray(gap(nl, t))
    return -3.0 * f2 * f1 * f1 + 6.0 * df * f2 * f2 - 2.0 * df * f3 * f1


def g_over_fprime4(nl: Nonlinearity, t):
    """g(t)/f'(t)^4, which equals the derivative of 2A/f' and is bounded at t = 1."""
    t = _check_positive(t)
    s = t - 1.0
    near = np.abs(s) < _SERIES_RADIUS
    out = np.empty(t.shape)
    if np.any(near):
        out[near] = _horner(nl._series["g_fp4"], s[near])
    far = ~near
    if np.any(far):
        tf = t[far]
        fp = potential_derivative(nl, tf, 1)
        out[far] = _coeff_g_raw(nl, tf) / fp**4
    return _scalar_or_array(out)


def certificate_psi(nl: Nonlinearity, z, x, theta):
    """psi(z, x, theta) = -f'(x)^2 + (1 - theta^2) f'(z) (f'(x) + (z - x) f''(x))."""
    fx = potential_derivative(nl, x, 1)
    return -fx * fx + (1.0 - theta * theta) * potential_derivative(nl, z, 1) * (
        fx + (np.asarray(z) - np.asarray(x)) * potential_derivative(nl, x, 2)
    )


def certificate_h(nl: Nonlinearity, x, theta):
    """Quadratic sign certificate h(x, theta) in x."""
    p = nl.p
    x = np.asarray(x, dtype=float)
    b = theta * theta - 3.0
    out = -2.0 + (p - 1.0) * (4.0 - (p - 2.0) * b) * x + (p - 1.0) * (-2.0 * (p - 1.0) + (p - 2.0) * b) * x * x
    return _scalar_or_array(out)
