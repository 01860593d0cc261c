"""Length functions of monotone arcs and the roots of L(z) = ell.

For an incidence index theta the compact-edge orbit starts at
(z, theta sqrt(2 f(z))) on the level C = (1 - theta^2) f(z).

* ``L1(z; theta)`` is the x-length of the increasing arc from z up to the
  first zero of u', the point f2^{-1}(C) >= 1.
* ``L2(z; theta)`` is the x-length of the decreasing arc from z down to
  f1^{-1}(C) <= 1.

Levels are handled through their distance G = f(1) - C from the top of
the potential, which stays accurate when z is close to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .quadrature import DEFAULT_TOL, arc_integrals
from .scalar_core import (
    DomainError,
    Nonlinearity,
    _inv_high,
    _inv_low,
    coeff_A,
    g_over_fprime4,
    gap,
    potential,
    potential_derivative,
    soliton,
    soliton_inverse,
)

INCREASING = "increasing"
DECREASING = "decreasing"
BRANCHES = (INCREASING, DECREASING)

CLIP = 1e-7          # distance kept from z = 1 and from the apex
CLIP_ZERO = 1e-14    # smallest z scanned near 0
DEFAULT_GRID = 400
DEDUP = 1e-8


@dataclass(frozen=True)
class LengthQuery:
    nl: Nonlinearity
    theta: float
    branch: str
    ell: float

    def __post_init__(self) -> None:
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")
        if self.branch == INCREASING and not self.theta >= 0:
            raise DomainError("the increasing branch needs theta >= 0")
        if self.branch == DECREASING and not (-1.0 < self.theta <= 0.0):
            raise DomainError("the decreasing branch needs theta in (-1, 0]")
        if not self.ell > 0:
            raise ValueError("edge length must be positive")


@dataclass(frozen=True)
class RootSet:
    roots: tuple
    multiplicity_flag: bool
    bracketing_grid_size: int


@dataclass(frozen=True)
class MonotonicityVerdict:
    kind: str  # "strictly-decreasing" | "strictly-increasing" | "non-monotone"
    fold_interval: tuple | None = None
    fold_window: tuple | None = None


def threshold_increasing(nl: Nonlinearity) -> float:
    """Common limit pi/sqrt(p-2) of both length functions at z = 1 when theta = 0."""
    return math.pi / math.sqrt(nl.p - 2.0)


def threshold_decreasing(theta: float) -> float:
    """Limit of L2 as z -> 0 for theta in (-1, 0)."""
    return math.asinh(abs(theta) / math.sqrt(1.0 - theta * theta))


def branch_domain(nl: Nonlinearity, theta: float, branch: str) -> tuple[float, float]:
    """Open interval of z on which the branch is defined."""
    if branch == INCREASING:
        if theta > 0:
            return 0.0, nl.apex
        if theta == 0:
            return 0.0, 1.0
        raise DomainError("the increasing branch needs theta >= 0")
    if branch == DECREASING:
        if -1.0 < theta < 0:
            return 0.0, nl.apex
        if theta == 0:
            return 1.0, nl.apex
        raise DomainError("the decreasing branch needs theta in (-1, 0]")
    raise ValueError(f"branch must be one of {BRANCHES}")


def _check_domain(nl, theta, branch, z):
    lo, hi = branch_domain(nl, theta, branch)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(~((z > lo) & (z < hi))):
        raise DomainError(f"z outside the {branch} branch domain ({lo}, {hi}) for theta={theta}")
    return z


def arc_endpoints(nl: Nonlinearity, theta: float, branch: str, z):
    """Lower/upper arc ends and their offsets f(end) - C for each z."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    fz = np.asarray(potential(nl, z))
    level = (1.0 - theta * theta) * fz
    g = np.asarray(gap(nl, z)) + theta * theta * fz
    off_z = theta * theta * fz
    if branch == INCREASING:
        far = np.array([_inv_high(nl, c, gg) for c, gg in zip(level, g)])
        return z, far, off_z, np.zeros_like(z)
    far = np.array([_inv_low(nl, c, gg) for c, gg in zip(level, g)])
    return far, z, np.zeros_like(z), off_z


def length_values(nl: Nonlinearity, theta: float, branch: str, z, tol: float = DEFAULT_TOL):
    """Vectorised L1 or L2 on an array of z inside the branch domain."""
    z = _check_domain(nl, theta, branch, z)
    lo, hi, olo, ohi = arc_endpoints(nl, theta, branch, z)
    v, _, _ = arc_integrals(nl, lo, hi, olo, ohi, tol=tol)
    return v / math.sqrt(2.0)


def L1(nl: Nonlinearity, theta: float, z: float) -> float:
    """Length of the increasing arc from (z, theta sqrt(2 f(z))) to u' = 0."""
    return float(length_values(nl, theta, INCREASING, z)[0])


def L2(nl: Nonlinearity, theta: float, z: float) -> float:
    """Length of the decreasing arc from (z, theta sqrt(2 f(z))) to u' = 0."""
    return float(length_values(nl, theta, DECREASING, z)[0])


def length_function(nl: Nonlinearity, theta: float, branch: str, z: float) -> float:
    return float(length_values(nl, theta, branch, z)[0])


def regularized_derivative_sign(nl: Nonlinearity, theta: float, z: float, branch: str) -> float:
    """H(z, theta) = sqrt(2) L'(z) ((1 - theta^2) f(z) - f(1)), from a non-singular integral."""
    zz = _check_domain(nl, theta, branch, z)
    lo, hi, olo, ohi = arc_endpoints(nl, theta, branch, zz)
    J, _, _ = arc_integrals(nl, lo, hi, olo, ohi,
                            weight=lambda t: np.asarray(g_over_fprime4(nl, t)), power=0.5)
    z = float(zz[0])
    fz = potential(nl, z)
    one = 1.0 - theta * theta
    head = theta * (nl.fmax - 2.0 * one * coeff_A(nl, z) * fz) / math.sqrt(fz)
    return float(head - one * potential_derivative(nl, z, 1) * J[0])


def length_derivative(nl: Nonlinearity, theta: float, z: float, branch: str) -> float:
    """L'(z) recovered from H; the denominator is negative on every branch domain."""
    H = regularized_derivative_sign(nl, theta, z, branch)
    denom = (1.0 - theta * theta) * potential(nl, z) - nl.fmax
    return H / (math.sqrt(2.0) * denom)


def _clipped_domain(nl, theta, branch):
    lo, hi = branch_domain(nl, theta, branch)
    lo = CLIP_ZERO if lo == 0.0 else lo + CLIP
    hi = hi - CLIP
    return lo, hi


def bracketing_grid(nl: Nonlinearity, lo: float, hi: float, n: int) -> np.ndarray:
    """Uniform points in z and in the soliton coordinate y, plus geometric end refinement."""
    half = max(2, n // 2)
    pts = [np.linspace(lo, hi, half)]
    ylo, yhi = soliton_inverse(nl, hi), soliton_inverse(nl, lo)
    pts.append(np.asarray(soliton(nl, np.linspace(ylo, yhi, n - half))))
    ratios = 0.5 ** np.arange(1, 21)
    pts.append(lo + (hi - lo) * ratios)
    pts.append(hi - (hi - lo) * ratios)
    z = np.unique(np.concatenate(pts))
    return z[(z >= lo) & (z <= hi)]


def solve_length(query: LengthQuery, grid_size: int = DEFAULT_GRID, tol: float = DEFAULT_TOL) -> RootSet:
    """All z in the clipped branch domain with L(z) = ell."""
    nl, theta, branch, ell = query.nl, query.theta, query.branch, query.ell
    lo, hi = _clipped_domain(nl, theta, branch)
    if not lo < hi:
        return RootSet((), False, 0)
    z = bracketing_grid(nl, lo, hi, grid_size)
    F = length_values(nl, theta, branch, z, tol) - ell

    def resid(x):
        return length_function(nl, theta, branch, x) - ell

    roots = []
    for i in range(len(z)):
        if F[i] == 0.0:
            roots.append(z[i])
    for i in np.flatnonzero(np.sign(F[:-1]) * np.sign(F[1:]) < 0):
        r = brentq(resid, z[i], z[i + 1], xtol=1e-300, rtol=1e-14, maxiter=200)
        roots.append(r)
    roots.sort()
    merged = []
    for r in roots:
        if merged and abs(r - merged[-1]) < DEDUP:
            continue
        if abs(resid(r)) < 1e-8 * max(1.0, ell):
            merged.append(r)
    return RootSet(tuple(float(r) for r in merged), len(merged) > 1, int(len(z)))


def monotonicity_scan(nl: Nonlinearity, theta: float, branch: str, interval: tuple[float, float],
                      n: int = 200, tol: float = 1e-10) -> MonotonicityVerdict:
    """Classify L on a uniform grid by its successive differences."""
    a, b = interval
    z = np.linspace(a, b, n)
    L = length_values(nl, theta, branch, z)
    d = np.diff(L)
    sig = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    if np.all(sig < 0):
        return MonotonicityVerdict("strictly-decreasing")
    if np.all(sig > 0):
        return MonotonicityVerdict("strictly-increasing")
    nz = np.flatnonzero(sig != 0)
    changes = [nz[j + 1] for j in range(len(nz) - 1) if sig[nz[j]] != sig[nz[j + 1]]]
    if not changes:
        # flat stretches only; treat as non-monotone on the flat part
        flat = np.flatnonzero(sig == 0)
        return MonotonicityVerdict("non-monotone", (float(z[flat[0]]), float(z[flat[-1] + 1])), None)
    # grid indices of the turning points of L
    turns = [int(c) for c in changes]
    fold = (float(z[max(turns[0] - 1, 0)]), float(z[min(turns[-1] + 1, n - 1)]))
    vals = L[turns]
    window = (float(np.min(vals)), float(np.max(vals))) if len(turns) > 1 else None
    return MonotonicityVerdict("non-monotone", fold, window)
