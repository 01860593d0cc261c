"""Integrals of t^m / sqrt(f(t) - C) along monotone phase-plane arcs.

Every arc [a, b] is cut at its midpoint and each half is measured from its
outer endpoint e.  Near e the radicand is written as

    f(t) - C = (f(t) - f(e)) + (f(e) - C),

where the first bracket comes from :func:`pot_diff` and the second is an
offset that is exactly zero at a turning point.  A turning point is removed
by t = e +/- s^2, which leaves a smooth integrand in s.  If f' (almost)
vanishes at a turning point the half is integrated with tanh-sinh in the
original variable instead.  Smooth halves go to a batched adaptive
Gauss-Kronrod 7/15 rule that works on many integrals at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .scalar_core import Nonlinearity, pot_diff, potential, potential_derivative

SINGULAR_CHOICES = ("lower", "upper", "both", "none")
DEFAULT_TOL = 1e-12
EVAL_BUDGET = 200_000
# |f'(e)| below which a turning point is treated with tanh-sinh
FLAT_ENDPOINT = 1e-6

_EPS = np.finfo(float).eps

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


class QuadratureError(RuntimeError):
    """Base class for quadrature failures."""


class SingularInteriorError(QuadratureError):
    """f(t) - C vanishes (or is negative) inside the integration interval."""


class ConvergenceError(QuadratureError):
    """The tolerance was not met within the evaluation budget."""

    def __init__(self, message: str, best: "QuadratureResult | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SingularIntegralSpec:
    """Integral of t^moment / sqrt(f(t) - level) over [lower, upper].

    ``lower_offset``/``upper_offset`` may carry f(endpoint) - level when the
    caller knows it more accurately than the subtraction would give.
    """

    nl: Nonlinearity
    lower: float
    upper: float
    level: float
    moment: int = 0
    singular_at: str = "none"
    lower_offset: float | None = None
    upper_offset: float | None = None


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


# ---------------------------------------------------------------------------
# batched adaptive Gauss-Kronrod


def _adaptive_gk(func: Callable, a: np.ndarray, b: np.ndarray, tol: float,
                 budget: int = EVAL_BUDGET):
    """Integrate func(x, owner) over [a[k], b[k]] for all k simultaneously.

    ``func`` receives node coordinates of shape (m, 15) and the owner index
    of each row.  Returns (values, error estimates, evaluation counts).
    """
    n = len(a)
    val = np.zeros(n)
    err = np.zeros(n)
    nev = np.zeros(n, dtype=np.int64)
    width = np.where(b > a, b - a, 1.0)
    ia, ib, own = a.astype(float), b.astype(float), np.arange(n)
    keep = ib > ia
    ia, ib, own = ia[keep], ib[keep], own[keep]
    while len(own):
        c = 0.5 * (ia + ib)
        h = 0.5 * (ib - ia)
        x = c[:, None] + h[:, None] * _NODES[None, :]
        y = func(x, own)
        if not np.all(np.isfinite(y)):
            raise SingularInteriorError("non-finite integrand value; radicand vanishes inside the arc")
        k15 = h * (y @ _KW)
        g7 = h * (y @ _GW)
        mean = k15 / np.where(h > 0, 2.0 * h, 1.0)
        resabs = h * (np.abs(y) @ _KW)
        resasc = h * (np.abs(y - mean[:, None]) @ _KW)
        e = np.abs(k15 - g7)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(resasc > 0, np.minimum(1.0, (200.0 * e / resasc) ** 1.5), 1.0)
        e = np.where(resasc > 0, resasc * scale, e)
        e = np.maximum(e, 50.0 * _EPS * resabs)
        np.add.at(nev, own, 15)
        local_tol = tol * (ib - ia) / width[own]
        tiny = (ib - ia) <= 1e-13 * np.maximum(np.abs(ia) + np.abs(ib), 1e-300)
        over = nev[own] >= budget
        done = (e <= local_tol) | (e <= 100.0 * _EPS * resabs) | tiny | over
        np.add.at(val, own[done], k15[done])
        np.add.at(err, own[done], e[done])
        split = ~done
        ia, ib, own, c = ia[split], ib[split], own[split], c[split]
        ia, ib, own = (np.concatenate([ia, c]), np.concatenate([c, ib]),
                       np.concatenate([own, own]))
    return val, err, nev


# ---------------------------------------------------------------------------
# tanh-sinh for a half whose turning point is (nearly) flat


def _tanh_sinh_half(radicand: Callable, weight: Callable, anchor: float, sign: float,
                    width: float, power: float, tol: float, budget: int = EVAL_BUDGET):
    """Integrate weight(t) * radicand(d)^power for t = anchor + sign*d, d in [0, width]."""
    def nodes(u):
        q = math.pi * np.sinh(u)
        # distance from the anchor, computed without cancellation
        d = width / (1.0 + np.exp(q))
        w = 0.5 * width * 0.5 * math.pi * np.cosh(u) / np.cosh(0.5 * q) ** 2
        return d, w

    def rule_sum(u):
        d, w = nodes(u)
        ok = (d > 0) & (d < width) & (w > 0)
        d, w = d[ok], w[ok]
        t = anchor + sign * d
        vals = weight(t) * radicand(d) ** power
        if not np.all(np.isfinite(vals)):
            raise SingularInteriorError("non-finite integrand in tanh-sinh rule")
        return float(np.sum(w * vals)), len(d)

    umax = 4.0
    h = 0.5
    u = np.arange(-umax, umax + 0.5 * h, h)
    total, nev = rule_sum(u)
    prev = total * h
    est = math.inf
    while nev < budget and h > 2.0**-12:
        h *= 0.5
        unew = np.arange(-umax + h, umax, 2.0 * h)
        s, m = rule_sum(unew)
        total += s
        nev += m
        cur = total * h
        est = abs(cur - prev)
        prev = cur
        if est <= max(tol, 64.0 * _EPS * abs(cur)) and h <= 0.125:
            break
    return prev, est, nev


# ---------------------------------------------------------------------------
# arcs


def arc_integrals(nl: Nonlinearity, lower, upper, lower_offset, upper_offset,
                  weight: Callable | None = None, moment: int = 0, power: float = -0.5,
                  tol: float = DEFAULT_TOL, budget: int = EVAL_BUDGET):
    """Integrate w(t) (f(t) - C)^power over many arcs [lower_k, upper_k].

    ``lower_offset`` and ``upper_offset`` are f(endpoint) - C; zero marks a
    turning point.  ``weight`` defaults to t^moment.  Returns arrays
    (values, error estimates, evaluation counts).
    """
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    n = lo.size
    off_lo = np.broadcast_to(np.asarray(lower_offset, dtype=float), (n,))
    off_hi = np.broadcast_to(np.asarray(upper_offset, dtype=float), (n,))
    if weight is None:
        if moment == 0:
            weight = lambda t: np.ones_like(t)
        else:
            weight = lambda t, m=moment: t**m

    mid = 0.5 * (lo + hi)
    # halves: anchor, direction, extent, offset
    anchor = np.concatenate([lo, hi])
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    extent = np.concatenate([mid - lo, hi - mid])
    offset = np.concatenate([off_lo, off_hi])
    owner = np.concatenate([np.arange(n), np.arange(n)])

    fp = np.abs(np.asarray(potential_derivative(nl, anchor, 1)))
    flat = (offset == 0.0) & (power < 0) & (fp < FLAT_ENDPOINT) & (anchor > 0) & (extent > 0)
    half_val = np.zeros(2 * n)
    half_err = np.zeros(2 * n)
    half_nev = np.zeros(2 * n, dtype=np.int64)

    for j in np.flatnonzero(flat):
        e, sg, off = anchor[j], sign[j], offset[j]
        rad = lambda d, e=e, sg=sg, off=off: np.asarray(pot_diff(nl, e, sg * d)) + off
        v, er, m = _tanh_sinh_half(rad, weight, e, sg, extent[j], power, tol / 2, budget)
        half_val[j], half_err[j], half_nev[j] = v, er, m

    reg = np.flatnonzero(~flat & (extent > 0))
    if len(reg):
        ra, rs, rx, ro = anchor[reg], sign[reg], extent[reg], offset[reg]
        smax = np.sqrt(rx)
        # geometric breakpoints in s when the anchor sits close to t = 0,
        # where the integrand varies on the scale sqrt(anchor)
        pieces_a, pieces_b, pieces_o = [], [], []
        for i in range(len(reg)):
            cuts = [0.0]
            if ra[i] > 0 and smax[i] > 8.0 * math.sqrt(ra[i]):
                nlev = min(40, int(math.log(smax[i] / math.sqrt(ra[i]), 4.0)))
                cuts += [smax[i] * 4.0 ** (-j) for j in range(nlev, 0, -1)]
            cuts.append(smax[i])
            pieces_a.extend(cuts[:-1])
            pieces_b.extend(cuts[1:])
            pieces_o.extend([i] * (len(cuts) - 1))
        pa = np.array(pieces_a)
        pb = np.array(pieces_b)
        po = np.array(pieces_o, dtype=np.int64)

        def integrand(s, rows):
            k = po[rows]
            e = ra[k][:, None]
            sg = rs[k][:, None]
            t = e + sg * s * s
            rad = np.asarray(pot_diff(nl, e, sg * s * s)) + ro[k][:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                body = np.where(s > 0, 2.0 * s * rad**power, 0.0)
            bad = ~(rad > 0) & (s > 0)
            if power < 0 and np.any(bad):
                body = np.where(bad, np.nan, body)
            return weight(t) * body

        # tolerance is shared between the pieces of each half
        v, er, m = _adaptive_gk(integrand, pa, pb, tol / (2.0 * max(1, len(pa) // max(1, len(reg)))), budget)
        hv = np.zeros(len(reg))
        he = np.zeros(len(reg))
        hn = np.zeros(len(reg), dtype=np.int64)
        np.add.at(hv, po, v)
        np.add.at(he, po, er)
        np.add.at(hn, po, m)
        half_val[reg], half_err[reg], half_nev[reg] = hv, he, hn

    val = np.zeros(n)
    err = np.zeros(n)
    nev = np.zeros(n, dtype=np.int64)
    np.add.at(val, owner, half_val)
    np.add.at(err, owner, half_err)
    np.add.at(nev, owner, half_nev)
    return val, err, nev


def _endpoint_offset(spec: SingularIntegralSpec, which: str) -> float:
    flags = {"lower": ("lower", "both"), "upper": ("upper", "both")}[which]
    if spec.singular_at in flags:
        return 0.0
    given = spec.lower_offset if which == "lower" else spec.upper_offset
    if given is not None:
        return float(given)
    x = spec.lower if which == "lower" else spec.upper
    return float(potential(spec.nl, x) - spec.level)


def _validate(spec: SingularIntegralSpec, off_lo: float, off_hi: float) -> None:
    if spec.singular_at not in SINGULAR_CHOICES:
        raise ValueError(f"singular_at must be one of {SINGULAR_CHOICES}")
    if not (spec.lower < spec.upper):
        raise ValueError("empty or reversed integration interval")
    if spec.moment < 0 or int(spec.moment) != spec.moment:
        raise ValueError("moment must be a non-negative integer")
    nl = spec.nl
    for which, x in (("lower", spec.lower), ("upper", spec.upper)):
        if spec.singular_at in (which, "both") and abs(potential(nl, x) - spec.level) >= 1e-9:
            raise ValueError(f"{which} endpoint flagged singular but f - level = "
                             f"{potential(nl, x) - spec.level!r}")
    for which, off in (("lower", off_lo), ("upper", off_hi)):
        if spec.singular_at not in (which, "both") and not off > 0:
            raise SingularInteriorError(f"f - level is not positive at the {which} endpoint")
    # interior positivity by sampling, each half measured from its own endpoint
    u = (np.arange(64) + 0.5) / 64.0
    t = spec.lower + (spec.upper - spec.lower) * u
    left = u <= 0.5
    rad = np.where(
        left,
        np.asarray(pot_diff(nl, spec.lower, t - spec.lower)) + off_lo,
        np.asarray(pot_diff(nl, spec.upper, t - spec.upper)) + off_hi,
    )
    if np.any(~(rad > 0)):
        raise SingularInteriorError("f - level vanishes inside the interval")


def integrate_singular(spec: SingularIntegralSpec, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """Integral of t^m / sqrt(f(t) - C) with inverse-square-root endpoints removed."""
    if not (1e-13 <= tol <= 1e-4):
        raise ValueError("tol must lie in [1e-13, 1e-4]")
    off_lo = _endpoint_offset(spec, "lower")
    off_hi = _endpoint_offset(spec, "upper")
    _validate(spec, off_lo, off_hi)
    v, e, m = arc_integrals(spec.nl, spec.lower, spec.upper, off_lo, off_hi,
                            moment=int(spec.moment), tol=tol)
    res = QuadratureResult(float(v[0]), float(e[0]), int(m[0]))
    if m[0] >= EVAL_BUDGET and e[0] > tol:
        raise ConvergenceError("evaluation budget exhausted", res)
    return res


def arc_norm_p(nl: Nonlinearity, z_lo: float, z_hi: float, level: float,
               lower_offset: float | None = None, upper_offset: float | None = None,
               tol: float = DEFAULT_TOL) -> float:
    """(1/sqrt 2) * integral of t^p / sqrt(f(t) - level) over [z_lo, z_hi].

    This is the p-th power of the L^p norm of a monotone solution piece
    traversing that arc.  Endpoints where f equals the level are treated as
    turning points unless an explicit offset is supplied.
    """
    if z_hi <= z_lo:
        if z_hi == z_lo:
            return 0.0
        raise ValueError("arc endpoints reversed")
    offs = []
    for x, given in ((z_lo, lower_offset), (z_hi, upper_offset)):
        if given is not None:
            offs.append(float(given))
        else:
            d = float(potential(nl, x) - level)
            offs.append(0.0 if abs(d) < 1e-9 else d)
    v, e, m = arc_integrals(nl, z_lo, z_hi, offs[0], offs[1],
                            weight=lambda t: t**nl.p, tol=tol)
    return float(v[0]) / math.sqrt(2.0)
