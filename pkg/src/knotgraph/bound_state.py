"""Bound states on regular single-knot graphs.

A positive core-symmetric state is fixed by its vertex value z: the
half-lines carry soliton pieces phi(x + y) or phi(x - y) with phi(y) = z
and every compact edge solves the initial value problem
u(0) = z, u'(0) = theta sqrt(2 f(z)).  The state is genuine when u'(ell) = 0
on the compact edges, which is what the length functions solve for.

For large ell, states concentrated on E0 compact edges are found from the
two arc-length maps (g1, g2) by a sign-change box search followed by a
Newton-type refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, root
from scipy.special import beta, betainc

from .graph_model import (
    HalfLineSplit,
    RegularGraph,
    UnsupportedTopologyError,
    concentration_partition,
    enumerate_splits,
    incidence_index,
    normalize_loops,
)
from .length_functions import (
    DECREASING,
    INCREASING,
    LengthQuery,
    RootSet,
    arc_endpoints,
    solve_length,
    threshold_decreasing,
    threshold_increasing,
)
from .quadrature import DEFAULT_TOL, arc_integrals
from .scalar_core import (
    DomainError,
    Nonlinearity,
    _inv_high,
    _inv_low,
    gap,
    pot_diff,
    potential,
    soliton,
    soliton_derivative,
    soliton_inverse,
)

NK_TOL = 1e-7
TERMINAL_TOL = 1e-7
DRIFT_TOL = 1e-8
ACTION_AGREEMENT = 1e-5
THRESHOLD_BAND = 1e-6
ODE_TOL = 1e-12
SAMPLE_STEP = 0.005
HALF_LINE_SPAN = 12.0  # sampled extent of half-lines, in units of 1/k

CAVEAT = (
    "Candidates are positive states only: core-symmetric monotone states and "
    "states concentrated on a subset of compact edges. For small ell positive "
    "states are known to carry the least action; for general ell the pool is a "
    "candidate set and its minimum is an upper bound for the least action level."
)


class IntegrationFailure(RuntimeError):
    def __init__(self, message: str, last_x: float):
        super().__init__(f"{message} (last valid x = {last_x!r})")
        self.last_x = last_x


class InconsistentStateError(RuntimeError):
    """The two action computations disagree; the state is not a bound state."""


class NoRootError(RuntimeError):
    """No concentrated state was located for these parameters."""


class NoCandidateError(RuntimeError):
    """The candidate pool is empty."""


@dataclass
class EdgeProfile:
    edge_id: str
    kind: str  # "pendant-arc" | "half-line"
    x: np.ndarray
    u: np.ndarray
    slope: np.ndarray
    level: float
    drift: float = 0.0
    # (lower, upper, lower offset, upper offset) of the phase-plane arc, or None
    arc: tuple | None = None

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.x.tolist(), self.u.tolist(), self.slope.tolist()))


@dataclass(frozen=True)
class Diagnostics:
    nk_residual: float
    hamiltonian_drift: float
    terminal_slope: float
    min_value: float

    @property
    def valid(self) -> bool:
        return (self.nk_residual < NK_TOL and self.terminal_slope < TERMINAL_TOL
                and self.hamiltonian_drift < DRIFT_TOL and self.min_value > 0)


@dataclass
class BoundState:
    nl: Nonlinearity
    graph: RegularGraph
    split: HalfLineSplit
    z: float
    y: float
    theta: float | None
    profiles: list
    diagnostics: Diagnostics
    kind: str  # "constant-core" | "increasing" | "decreasing" | "concentrated"
    E0: int | None = None
    b: float | None = None
    action: float | None = None
    action_direct: float | None = None
    label: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.diagnostics.valid

    @property
    def core_symmetric(self) -> bool:
        return self.kind != "concentrated"

    def compact_profiles(self) -> list:
        return [pr for pr in self.profiles if pr.kind == "pendant-arc"]


@dataclass
class ClassificationReport:
    theta: float
    ell: float
    item: str
    description: str
    constant_solution: bool
    predicted: dict
    thresholds: dict
    computed_roots: dict
    consistent: bool


# ---------------------------------------------------------------------------
# closed-form soliton integrals


def _sech_power_tail(nl: Nonlinearity, q: float, Y: float) -> float:
    """Integral of sech^q(k x) over [Y, inf) for any real Y."""
    k = nl.k
    a = 0.5 * q
    full = beta(a, 0.5) / k
    if Y < 0:
        return full - _sech_power_tail(nl, q, -Y)
    # sech^2(kY) = 1/cosh^2, computed without overflow
    ky = k * Y
    s2 = math.exp(-2.0 * ky) * 4.0 / (1.0 + math.exp(-2.0 * ky)) ** 2
    return 0.5 * full * betainc(a, 0.5, s2)


def soliton_power_tail(nl: Nonlinearity, m: float, Y: float) -> float:
    """Integral of phi(x)^m over [Y, inf)."""
    return nl.apex**m * _sech_power_tail(nl, 2.0 * m / (nl.p - 2.0), Y)


def soliton_norm_p(nl: Nonlinearity) -> float:
    """||phi||_p^p over the real line."""
    return 2.0 * soliton_power_tail(nl, nl.p, 0.0)


def soliton_action(nl: Nonlinearity) -> float:
    """S(phi) = (1/2 - 1/p) ||phi||_p^p."""
    return (0.5 - 1.0 / nl.p) * soliton_norm_p(nl)


def _half_line_action_density_integral(nl: Nonlinearity, Y: float) -> float:
    # on the homoclinic u'^2 = 2 f(u), so the action density is u^2 - (2/p) u^p
    return soliton_power_tail(nl, 2.0, Y) - 2.0 / nl.p * soliton_power_tail(nl, nl.p, Y)


# ---------------------------------------------------------------------------
# initial value problem


def _rhs(nl: Nonlinearity):
    pm2 = nl.p - 2.0

    def f(x, w):
        u, v = w
        return [v, u - abs(u) ** pm2 * u]

    return f


def integrate_ivp(nl: Nonlinearity, z: float, slope0: float, length: float, tol: float = ODE_TOL,
                  edge_id: str = "edge", n_samples: int | None = None) -> EdgeProfile:
    """Solve -u'' + u = |u|^{p-2} u, u(0) = z, u'(0) = slope0 on [0, length]."""
    if not length > 0:
        raise ValueError("length must be positive")
    if not (1e-12 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    n = n_samples or max(201, int(math.ceil(length / SAMPLE_STEP)) + 1)
    level = -0.5 * slope0 * slope0 + potential(nl, z)

    def blowup(x, w):
        return 1e6 - abs(w[0])

    blowup.terminal = True
    sol = solve_ivp(_rhs(nl), (0.0, length), [z, slope0], method="DOP853", rtol=tol,
                    atol=tol * 1e-12, dense_output=True, events=blowup)
    if sol.status != 0 or sol.t[-1] < length:
        raise IntegrationFailure(f"integration stopped: {sol.message}", float(sol.t[-1]))
    x = np.linspace(0.0, length, n)
    u, v = sol.sol(x)
    u[0], v[0] = z, slope0
    F = -0.5 * v * v + np.asarray(potential(nl, u))
    drift = float(np.max(np.abs(F - level)))
    return EdgeProfile(edge_id, "pendant-arc", x, u, v, float(level), drift)


def _half_line_profile(nl: Nonlinearity, edge_id: str, shift: float) -> EdgeProfile:
    span = HALF_LINE_SPAN / nl.k
    x = np.linspace(0.0, span, 1201)
    u = np.asarray(soliton(nl, x + shift))
    v = np.asarray(soliton_derivative(nl, x + shift))
    return EdgeProfile(edge_id, "half-line", x, u, v, 0.0, 0.0)


def _edge_ids(g: RegularGraph) -> list[str]:
    ids = [f"pendant_{i}" for i in range(g.P)]
    for j in range(g.L):
        ids += [f"loop_{j}_a", f"loop_{j}_b"]
    return ids


def _copy_profile(pr: EdgeProfile, edge_id: str) -> EdgeProfile:
    return EdgeProfile(edge_id, pr.kind, pr.x, pr.u, pr.slope, pr.level, pr.drift, pr.arc)


def _diagnostics(nl: Nonlinearity, half_lines: list, compact: list) -> Diagnostics:
    nk = sum(pr.slope[0] for pr in half_lines) + sum(pr.slope[0] for pr in compact)
    terminal = max((abs(pr.slope[-1]) for pr in compact), default=0.0)
    drift = max((pr.drift for pr in compact), default=0.0)
    mins = [float(np.min(pr.u)) for pr in compact] + [float(np.min(pr.u)) for pr in half_lines]
    return Diagnostics(abs(float(nk)), float(drift), float(terminal), min(mins))


def _assemble(nl, g, split, z, y, half_shifts, compact_specs, kind, theta, **kw) -> BoundState:
    """compact_specs: list of (edge_id, profile) already integrated."""
    half = []
    for i, sh in enumerate(half_shifts):
        half.append(_half_line_profile(nl, f"half_line_{i}", sh))
    compact = [pr for _, pr in compact_specs]
    diag = _diagnostics(nl, half, compact)
    state = BoundState(nl, g, split, z, y, theta, half + compact, diag, kind, **kw)
    state.extras["half_shifts"] = list(half_shifts)
    if state.valid:
        state.action = action(state)
    return state


def build_core_symmetric(nl: Nonlinearity, g: RegularGraph, s: HalfLineSplit, z: float,
                         tol: float = ODE_TOL) -> BoundState:
    """Half-lines from the split, compact edges from the shooting problem at z."""
    if g.is_star:
        raise UnsupportedTopologyError("star graph: no compact core")
    theta = incidence_index(g, s)
    if not (0.0 < z < nl.apex):
        raise DomainError("z must lie in (0, apex)")
    y = soliton_inverse(nl, z)
    fz = potential(nl, z)
    slope0 = theta * math.sqrt(2.0 * fz)
    prof = integrate_ivp(nl, z, slope0, g.ell, tol)
    if z == 1.0 and theta == 0.0:
        kind = "constant-core"
        prof.arc = None
    else:
        kind = INCREASING if theta > 0 or (theta == 0 and z < 1.0) else DECREASING
        lo, hi, olo, ohi = arc_endpoints(nl, theta, kind, np.array([z]))
        prof.arc = (float(lo[0]), float(hi[0]), float(olo[0]), float(ohi[0]))
    shifts = [y] * s.H_plus + [-y] * s.H_minus
    compact = [(eid, _copy_profile(prof, eid)) for eid in _edge_ids(g)]
    return _assemble(nl, g, s, z, y, shifts, compact, kind, theta)


# ---------------------------------------------------------------------------
# action


def _trapezoid_action(nl: Nonlinearity, pr: EdgeProfile) -> float:
    u, v, x = pr.u, pr.slope, pr.x
    h = x[1] - x[0]
    dens = 0.5 * (v * v + u * u) - np.abs(u) ** nl.p / nl.p
    trap = h * (np.sum(dens) - 0.5 * (dens[0] + dens[-1]))
    # Euler-Maclaurin end correction with d(dens)/dx = 2 u' (u - u^{p-1})
    dd = 2.0 * v * (u - np.abs(u) ** (nl.p - 2.0) * u)
    return float(trap - h * h / 12.0 * (dd[-1] - dd[0]))


def _edge_norm_p(nl: Nonlinearity, pr: EdgeProfile, length: float) -> float:
    if pr.arc is None:
        return float(abs(pr.u[0]) ** nl.p * length)
    lo, hi, olo, ohi = pr.arc
    if hi <= lo:
        return 0.0
    v, _, _ = arc_integrals(nl, lo, hi, olo, ohi, weight=lambda t: t**nl.p, tol=DEFAULT_TOL)
    return float(v[0]) / math.sqrt(2.0)


def action(state: BoundState) -> float:
    """Action of a valid state, computed two ways that must agree."""
    if not state.valid:
        raise InconsistentStateError("action requested for a state that fails the bound-state checks")
    nl = state.nl
    shifts = state.extras["half_shifts"]
    # (a) full functional: sampled compact edges plus closed-form half-line tails
    direct = sum(_trapezoid_action(nl, pr) for pr in state.compact_profiles())
    direct += sum(_half_line_action_density_integral(nl, sh) for sh in shifts)
    # (b) (1/2 - 1/p) ||u||_p^p along the phase-plane arcs
    norm = sum(_edge_norm_p(nl, pr, state.graph.ell) for pr in state.compact_profiles())
    norm += sum(soliton_power_tail(nl, nl.p, sh) for sh in shifts)
    via_norm = (0.5 - 1.0 / nl.p) * norm
    state.action_direct = float(direct)
    if abs(direct - via_norm) >= ACTION_AGREEMENT * max(1.0, abs(via_norm)):
        raise InconsistentStateError(
            f"action paths disagree: functional {direct!r} vs norm identity {via_norm!r}")
    return float(via_norm)


# ---------------------------------------------------------------------------
# classification of the shooting problem


def _count_range(lo: int, hi: float) -> list:
    return [lo, None if math.isinf(hi) else int(hi)]


def classify_monotone(nl: Nonlinearity, theta: float, ell: float,
                      grid_size: int = 400) -> ClassificationReport:
    """Predicted versus computed monotone solutions of the shooting problem."""
    if not ell > 0:
        raise ValueError("ell must be positive")
    l1 = threshold_increasing(nl)
    l2 = threshold_decreasing(theta) if -1.0 < theta < 0.0 else None
    constant = False
    inc = (0, 0)
    dec = (0, 0)
    branches = []
    if theta <= -1.0:
        item = "theta<=-1"
        desc = "no solutions"
    elif theta < 0.0:
        item = "-1<theta<0"
        branches = [DECREASING]
        if ell < l2 - THRESHOLD_BAND:
            dec = (0, 0)
            desc = f"no monotone solutions; ell below the decreasing threshold {l2:.6f}"
        elif ell > l2 + THRESHOLD_BAND:
            dec = (1, 1)
            desc = "unique decreasing solution"
        else:
            dec = (0, 1)
            desc = "ell at the decreasing threshold"
    elif theta == 0.0:
        item = "theta=0"
        constant = True
        branches = [INCREASING, DECREASING]
        if ell < l1 - THRESHOLD_BAND:
            desc = "no monotone solutions; constant solution exists"
        elif ell > l1 + THRESHOLD_BAND:
            inc = dec = (1, 1)
            desc = ("constant solution exists; unique increasing solution with z<1 "
                    "and unique decreasing solution with z>1")
        else:
            inc = dec = (0, 1)
            desc = "ell at the threshold pi/sqrt(p-2); constant solution exists"
    elif theta < 1.0:
        item = "0<theta<1"
        branches = [INCREASING]
        inc = (1, 1)
        desc = "unique increasing solution"
    elif theta == 1.0:
        item = "theta=1"
        branches = [INCREASING]
        inc = (1, 1)
        desc = "unique solution, a piece of the soliton"
    elif theta <= 2.0:
        item = "1<theta<=2"
        branches = [INCREASING]
        inc = (1, 1)
        desc = "unique increasing solution"
    else:
        item = "theta>2"
        branches = [INCREASING]
        inc = (1, math.inf)
        desc = "at least one increasing solution; several inside a fold window"

    computed = {}
    for br in branches:
        computed[br] = solve_length(LengthQuery(nl, theta, br, ell), grid_size)
    consistent = True
    for br, (lo, hi) in ((INCREASING, inc), (DECREASING, dec)):
        n = len(computed[br].roots) if br in computed else 0
        if not (lo <= n <= hi):
            consistent = False
    predicted = {
        "constant": constant,
        INCREASING: _count_range(*inc),
        DECREASING: _count_range(*dec),
    }
    thresholds = {"increasing_theta0": l1, "decreasing": l2}
    return ClassificationReport(theta, ell, item, desc, constant, predicted, thresholds,
                                computed, consistent)


# ---------------------------------------------------------------------------
# concentrated states


def _w2_slope(nl, z, b, H, E, E0):
    return (H * math.sqrt(2.0 * potential(nl, z)) + (E - E0) * b) / E0


def _pm_from_z1(nl: Nonlinearity, z, z1, H: int, E: int, E0: int, tol: float = DEFAULT_TOL):
    """Vectorised (g1, g2, b) parametrised by the end value z1 of the decreasing arc."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    z1 = np.atleast_1d(np.asarray(z1, dtype=float))
    z, z1 = np.broadcast_arrays(z, z1)
    half_b2 = np.asarray(pot_diff(nl, z1, z - z1))  # f(z) - f(z1) = b^2/2
    b = np.sqrt(2.0 * half_b2)
    sq = np.sqrt(2.0 * np.asarray(potential(nl, z)))
    w2 = (H * sq + (E - E0) * b) / E0
    half_w2 = 0.5 * w2 * w2
    c2 = np.asarray(potential(nl, z)) - half_w2
    g2gap = np.asarray(gap(nl, z)) + half_w2
    z2 = np.array([_inv_high(nl, c, g) for c, g in zip(c2, g2gap)])
    lo = np.concatenate([z1, z])
    hi = np.concatenate([z, z2])
    olo = np.concatenate([np.zeros_like(z), half_w2])
    ohi = np.concatenate([half_b2, np.zeros_like(z)])
    v, _, _ = arc_integrals(nl, lo, hi, olo, ohi, tol=tol)
    v = v / math.sqrt(2.0)
    n = len(z)
    return v[:n], v[n:], b


def pm_maps(nl: Nonlinearity, z: float, b: float, H: int, P_plus_2L: int, E0: int) -> tuple[float, float]:
    """Arc lengths (g1, g2) of the decreasing and increasing edge profiles."""
    if not (0.0 < z < 1.0):
        raise DomainError("z must lie in (0, 1)")
    bmax = math.sqrt(2.0 * potential(nl, z))
    if not (0.0 < b < bmax):
        raise DomainError(f"b must lie in (0, {bmax!r})")
    if not (1 <= E0 <= P_plus_2L):
        raise DomainError("E0 must lie in [1, P + 2L]")
    half_b2 = 0.5 * b * b
    z1 = _inv_low(nl, potential(nl, z) - half_b2, gap(nl, z) + half_b2)
    w2 = _w2_slope(nl, z, b, H, P_plus_2L, E0)
    half_w2 = 0.5 * w2 * w2
    z2 = _inv_high(nl, potential(nl, z) - half_w2, gap(nl, z) + half_w2)
    v, _, _ = arc_integrals(nl, np.array([z1, z]), np.array([z, z2]),
                            np.array([0.0, half_w2]), np.array([half_b2, 0.0]))
    return float(v[0] / math.sqrt(2.0)), float(v[1] / math.sqrt(2.0))


def _build_concentrated(nl, g, E0, z, b, P0, L0) -> BoundState:
    H, E = g.H, g.E
    ell = g.ell
    y = soliton_inverse(nl, z)
    w2 = _w2_slope(nl, z, b, H, E, E0)
    up = integrate_ivp(nl, z, w2, ell)
    half_w2 = 0.5 * w2 * w2
    z2 = _inv_high(nl, potential(nl, z) - half_w2, gap(nl, z) + half_w2)
    up.arc = (z, z2, half_w2, 0.0)
    compact = []
    ids = _edge_ids(g)
    pend = ids[: g.P]
    loops = [ids[g.P + 2 * j: g.P + 2 * j + 2] for j in range(g.L)]
    hot = set(pend[:P0]) | {e for pair in loops[:L0] for e in pair}
    down = None
    if E0 < E:
        down = integrate_ivp(nl, z, -b, ell)
        half_b2 = 0.5 * b * b
        z1 = _inv_low(nl, potential(nl, z) - half_b2, gap(nl, z) + half_b2)
        down.arc = (z1, z, 0.0, half_b2)
    for eid in ids:
        compact.append((eid, _copy_profile(up if eid in hot else down, eid)))
    st = _assemble(nl, g, HalfLineSplit(H, 0), z, y, [y] * H, compact, "concentrated", None,
                   E0=E0, b=b)
    st.extras["concentrated_edges"] = sorted(hot)
    return st


def concentrated_state(nl: Nonlinearity, g: RegularGraph, E0: int, eps: float = 0.05,
                       scan: int = 40) -> BoundState:
    """State close to a half-soliton on E0 compact edges and small elsewhere."""
    if g.is_star:
        raise UnsupportedTopologyError("star graph: no compact core")
    H, E, ell = g.H, g.E, g.ell
    if not (1 <= E0 <= E):
        raise ValueError("E0 must lie in [1, P + 2L]")
    part = concentration_partition(g, E0)
    if part is None:
        raise ValueError(f"E0={E0} is not P0 + 2 L0 with P0 <= {g.P}, L0 <= {g.L}")
    P0, L0 = part
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")

    if E0 == E:
        # every compact edge concentrates: this is the symmetric increasing state
        theta = H / E
        rs = solve_length(LengthQuery(nl, theta, INCREASING, ell))
        small = [r for r in rs.roots if r < eps]
        if not small:
            raise NoRootError(f"no increasing state with v(0) < {eps} at ell={ell}")
        st = build_core_symmetric(nl, g, HalfLineSplit(H, 0), small[0])
        st.kind = "concentrated"
        st.E0 = E0
        st.theta = None
        st.extras["concentrated_edges"] = _edge_ids(g)
        return st

    def G(u, r):
        z = np.exp(u)
        z1 = z * np.exp(r)
        return _pm_from_z1(nl, z, z1, H, E, E0)

    u_hi = math.log(eps)
    r_hi = math.log1p(-1e-6)
    r_grid0 = np.linspace(-ell - 6.0, r_hi, 12)
    # the face z = eps must have g2 < ell for every b
    _, g2_top, _ = G(np.full(len(r_grid0), u_hi), r_grid0)
    if not np.all(g2_top < ell):
        raise NoRootError(f"no sign-change box: g2 >= ell on the face z = {eps} (ell={ell})")
    # lower z face: g2 > ell for every b
    u_lo = u_hi
    for _ in range(60):
        u_lo -= math.log(10.0)
        _, g2_bot, _ = G(np.full(len(r_grid0), u_lo), r_grid0)
        if np.all(g2_bot > ell):
            break
    else:
        raise NoRootError("could not place the lower face of the box")
    # r faces: g1 < ell at r_hi (b -> 0) and g1 > ell at r_lo (b -> sqrt(2 f(z)))
    u_grid0 = np.linspace(u_lo, u_hi, 12)
    g1_hi, _, _ = G(u_grid0, np.full(12, r_hi))
    if not np.all(g1_hi < ell):
        raise NoRootError("g1 exceeds ell as b -> 0")
    r_lo = -ell - 2.0
    for _ in range(60):
        g1_lo, _, _ = G(u_grid0, np.full(12, r_lo))
        if np.all(g1_lo > ell):
            break
        r_lo -= 2.0
    else:
        raise NoRootError("could not place the large-b face of the box")

    uu = np.linspace(u_lo, u_hi, scan)
    rr = np.linspace(r_lo, r_hi, scan)
    U, R = np.meshgrid(uu, rr, indexing="ij")
    g1, g2, _ = G(U.ravel(), R.ravel())
    A = (g1 - ell).reshape(scan, scan)
    B = (g2 - ell).reshape(scan, scan)
    # Poincare-Miranda face signs on the scanned box
    faces_ok = (np.all(A[:, -1] < 0) and np.all(A[:, 0] > 0)
                and np.all(B[0, :] > 0) and np.all(B[-1, :] < 0))
    if not faces_ok:
        raise NoRootError("box faces do not have the Poincare-Miranda sign pattern")
    cell = None
    for i in range(scan - 1):
        for j in range(scan - 1):
            a = A[i:i + 2, j:j + 2]
            bb = B[i:i + 2, j:j + 2]
            if a.min() <= 0 <= a.max() and bb.min() <= 0 <= bb.max():
                cell = (i, j)
                break
        if cell:
            break
    if cell is None:
        raise NoRootError("no scan cell with a sign change of both maps")
    i, j = cell

    def resid(w):
        a, c, _ = G(np.array([w[0]]), np.array([w[1]]))
        return np.array([a[0] - ell, c[0] - ell])

    x0 = np.array([0.5 * (uu[i] + uu[i + 1]), 0.5 * (rr[j] + rr[j + 1])])
    sol = root(resid, x0, method="hybr", options={"xtol": 1e-14})
    u_star, r_star = sol.x
    in_box = u_lo <= u_star <= u_hi and r_lo <= r_star <= r_hi
    if not (in_box and np.max(np.abs(resid(sol.x))) < 1e-10 * max(1.0, ell)):
        u_star, r_star = _nested_solve(G, ell, u_lo, u_hi, r_lo, r_hi)
    z = math.exp(u_star)
    z1 = z * math.exp(r_star)
    _, _, bvec = _pm_from_z1(nl, z, z1, H, E, E0)
    st = _build_concentrated(nl, g, E0, z, float(bvec[0]), P0, L0)
    st.extras["box"] = {"log_z": [u_lo, u_hi], "log_z1_over_z": [r_lo, r_hi], "cell": [int(i), int(j)]}
    return st


def _nested_solve(G, ell, u_lo, u_hi, r_lo, r_hi):
    """Fallback: g1 = ell fixes r for every u, then g2 = ell fixes u."""
    def r_of(u):
        return brentq(lambda r: G(np.array([u]), np.array([r]))[0][0] - ell, r_lo, r_hi,
                      xtol=1e-14, rtol=1e-14)

    def h(u):
        return G(np.array([u]), np.array([r_of(u)]))[1][0] - ell

    u = brentq(h, u_lo, u_hi, xtol=1e-14, rtol=1e-14)
    return u, r_of(u)


# ---------------------------------------------------------------------------
# ranking


@dataclass
class Candidate:
    state: BoundState
    label: str
    key: tuple
    open_flag: bool = False


@dataclass
class RankReport:
    graph: RegularGraph
    p: float
    candidates: list
    open_reasons: list
    caveat: str = CAVEAT


def rank_candidates(nl: Nonlinearity, g: RegularGraph, eps: float = 0.05,
                    grid_size: int = 400) -> RankReport:
    """Positive candidates sorted by action; the least one is flagged when undecided."""
    if g.is_star:
        raise UnsupportedTopologyError("star graph: the incidence index is undefined")
    splits = enumerate_splits(g.H)
    pool: list[Candidate] = []
    multiple = False
    for si, s in enumerate(splits):
        theta = incidence_index(g, s)
        tag = f"H+={s.H_plus},H-={s.H_minus}"
        if s.H_plus == s.H_minus:
            st = build_core_symmetric(nl, g, s, 1.0)
            if st.valid:
                st.label = f"constant-core {tag}"
                pool.append(Candidate(st, st.label, (si, 0, 0)))
        rep = classify_monotone(nl, theta, g.ell, grid_size)
        for bi, br in enumerate((INCREASING, DECREASING)):
            rs = rep.computed_roots.get(br)
            if rs is None:
                continue
            if len(rs.roots) > 1:
                multiple = True
            for ri, z in enumerate(rs.roots):
                st = build_core_symmetric(nl, g, s, z)
                if not st.valid:
                    continue
                st.label = f"{br} {tag} root {ri}"
                pool.append(Candidate(st, st.label, (si, 1 + bi, ri)))
    for E0 in range(1, g.E):
        if concentration_partition(g, E0) is None:
            continue
        try:
            st = concentrated_state(nl, g, E0, eps)
        except NoRootError:
            continue
        if not st.valid:
            continue
        st.label = f"concentrated E0={E0}"
        pool.append(Candidate(st, st.label, (len(splits), E0, 0)))
    if not pool:
        raise NoCandidateError("no candidate bound state was constructed")
    pool.sort(key=lambda c: (c.state.action, c.key))

    s_phi = soliton_action(nl)
    reasons = []
    if len(pool) > 1 and pool[1].state.action - pool[0].state.action < 1e-4 * s_phi:
        reasons.append("the two least actions differ by less than 1e-4 S(phi)")
    if g.P == 0 and g.H == 1 and g.L >= 2 and any(c.state.kind == "concentrated" for c in pool):
        reasons.append("flower graph at large ell: concentration on the half-line or on a loop is undecided")
    if g.H >= 2 and abs(pool[0].state.action - 0.5 * g.H * s_phi) < 0.05 * s_phi:
        reasons.append("small-ell regime: actions of all splits approach H S(phi)/2 and their order is undecided")
    if multiple:
        reasons.append("several symmetric states share one incidence index")
    pool[0].open_flag = bool(reasons)
    return RankReport(g, nl.p, pool, reasons)
