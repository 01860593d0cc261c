from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knotgraph.bound_state import (
    NoRootError,
    build_core_symmetric,
    classify_monotone,
    concentrated_state,
    integrate_ivp,
    pm_maps,
    rank_candidates,
    soliton_action,
    soliton_power_tail,
)
from knotgraph.graph_model import HalfLineSplit, RegularGraph, UnsupportedTopologyError
from knotgraph.length_functions import INCREASING, L1, LengthQuery, solve_length
from knotgraph.quadrature import arc_norm_p
from knotgraph.scalar_core import Nonlinearity, potential, potential_inverse_high, soliton, soliton_inverse

NL4 = Nonlinearity(4.0)
S_PHI = 4.0 / 3.0
TADPOLE = RegularGraph(1, 0, 1, 1.0)
TGRAPH = RegularGraph(2, 1, 0, 1.0)


def test_ivp_examples():
    pr = integrate_ivp(NL4, math.sqrt(2.0), 0.0, 3.0)
    assert np.max(np.abs(pr.u - soliton(NL4, pr.x))) < 1e-8
    pr = integrate_ivp(NL4, 1.0, 0.0, 5.0)
    assert np.all(pr.u == 1.0) and np.all(pr.slope == 0.0)
    z = 0.5
    pr = integrate_ivp(NL4, z, math.sqrt(2 * potential(NL4, z)), soliton_inverse(NL4, z))
    assert abs(pr.u[-1] - math.sqrt(2.0)) < 1e-7 and abs(pr.slope[-1]) < 1e-7
    assert len(pr.x) >= 200 and pr.drift < 1e-10


def test_ivp_errors():
    with pytest.raises(ValueError):
        integrate_ivp(NL4, 0.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        integrate_ivp(NL4, 0.5, 0.0, 1.0, tol=1e-3)


def test_closed_form_tails():
    assert soliton_action(NL4) == pytest.approx(S_PHI, abs=1e-14)
    assert 0.25 * soliton_power_tail(NL4, 4.0, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-14)
    # int_Y^inf 4 sech^4 = 4 (2/3 - t + t^3/3), t = tanh Y
    for Y in (0.3, 2.0, -0.7):
        t = math.tanh(Y)
        assert soliton_power_tail(NL4, 4.0, Y) == pytest.approx(4 * (2 / 3 - t + t**3 / 3), rel=1e-13)
        assert soliton_power_tail(NL4, 2.0, Y) == pytest.approx(2 * (1 - t), rel=1e-13)


def test_tadpole_increasing_state():
    z = solve_length(LengthQuery(NL4, 0.5, INCREASING, 1.0)).roots[0]
    st_ = build_core_symmetric(NL4, TADPOLE, HalfLineSplit(1, 0), z)
    assert st_.valid and st_.kind == "increasing"
    assert st_.diagnostics.terminal_slope < 1e-7
    assert st_.action > 0
    assert abs(st_.action - st_.action_direct) < 1e-5


def test_half_soliton_state():
    g = RegularGraph(1, 1, 0, 1.0)
    z = solve_length(LengthQuery(NL4, 1.0, INCREASING, 1.0)).roots[0]
    st_ = build_core_symmetric(NL4, g, HalfLineSplit(1, 0), z)
    assert st_.valid
    assert st_.action == pytest.approx(2.0 / 3.0, abs=1e-10)


def test_constant_core():
    st_ = build_core_symmetric(NL4, TGRAPH, HalfLineSplit(1, 1), 1.0)
    assert st_.valid and st_.kind == "constant-core"
    assert st_.y == pytest.approx(soliton_inverse(NL4, 1.0))
    assert np.all(st_.compact_profiles()[0].u == 1.0)
    # ell from the core plus one full soliton from the two tails
    assert st_.action == pytest.approx(0.25 * (1.0 + 16.0 / 3.0), abs=1e-10)


def test_no_decreasing_tadpole_state_below_threshold():
    g = RegularGraph(1, 0, 1, 0.3)
    for z in np.linspace(0.05, 1.4, 28):
        assert not build_core_symmetric(NL4, g, HalfLineSplit(0, 1), z).valid


def test_star_graph_rejected():
    with pytest.raises(UnsupportedTopologyError):
        build_core_symmetric(NL4, RegularGraph(3, 0, 0, 1.0), HalfLineSplit(3, 0), 0.5)
    with pytest.raises(UnsupportedTopologyError):
        rank_candidates(NL4, RegularGraph(3, 0, 0, 1.0))


def test_arc_norm_matches_profile():
    theta = 0.5
    c = (1 - theta**2) * potential(NL4, 1.0)
    top = potential_inverse_high(NL4, c)
    length = L1(NL4, theta, 1.0)
    pr = integrate_ivp(NL4, 1.0, theta * math.sqrt(2 * potential(NL4, 1.0)), length, n_samples=20001)
    trap = np.trapezoid(pr.u**4, pr.x) if hasattr(np, "trapezoid") else np.trapz(pr.u**4, pr.x)
    val = arc_norm_p(NL4, 1.0, top, c, lower_offset=theta**2 * 0.25, upper_offset=0.0)
    assert val == pytest.approx(trap, abs=1e-6)


def test_classification_examples():
    rep = classify_monotone(NL4, 0.0, 2.0)
    assert rep.constant_solution and rep.consistent
    assert all(len(r.roots) == 0 for r in rep.computed_roots.values())
    rep = classify_monotone(NL4, 0.0, 3.0)
    assert rep.consistent
    (zi,), (zd,) = rep.computed_roots["increasing"].roots, rep.computed_roots["decreasing"].roots
    assert 0 < zi < 1 < zd < NL4.apex
    rep = classify_monotone(NL4, -1.0, 1.0)
    assert rep.consistent and rep.computed_roots == {}


def test_pm_maps_examples():
    z = 0.3
    bmax = math.sqrt(2 * potential(NL4, z))
    g1_small, _ = pm_maps(NL4, z, 1e-8, 1, 2, 1)
    assert g1_small < 1e-3
    g1_big, _ = pm_maps(NL4, z, bmax - 1e-10, 1, 2, 1)
    assert g1_big > 10


def test_pm_maps_against_ivp():
    z, b = 0.1, 0.05
    g1, g2 = pm_maps(NL4, z, b, 1, 2, 1)
    assert g1 > 0 and g2 > 0
    w2 = (math.sqrt(2 * potential(NL4, z)) + b) / 1
    assert abs(integrate_ivp(NL4, z, -b, g1).slope[-1]) < 1e-6
    assert abs(integrate_ivp(NL4, z, w2, g2).slope[-1]) < 1e-6


def test_concentrated_examples():
    fork = RegularGraph(1, 2, 0, 15.0)
    st_ = concentrated_state(NL4, fork, 1, 0.05)
    assert st_.valid and st_.z < 0.05
    assert abs(st_.action - 0.5 * S_PHI) < 0.1 * S_PHI
    st2 = concentrated_state(NL4, fork, 2, 0.05)
    assert st2.valid and abs(st2.action - S_PHI) < 0.1 * S_PHI
    with pytest.raises(NoRootError):
        concentrated_state(NL4, RegularGraph(1, 2, 0, 0.5), 1, 0.05)
    with pytest.raises(ValueError):
        concentrated_state(NL4, RegularGraph(1, 0, 1, 15.0), 1, 0.05)


def test_rank_examples():
    rep = rank_candidates(NL4, TADPOLE)
    top = rep.candidates[0]
    assert top.state.kind == "increasing" and top.state.theta == 0.5
    assert len([c for c in rep.candidates if c.state.kind == "increasing"]) == 1
    rep = rank_candidates(NL4, RegularGraph(1, 2, 0, 20.0))
    assert rep.candidates[0].state.kind == "concentrated"
    sym = [c.state.action for c in rep.candidates if c.state.core_symmetric]
    assert sym and rep.candidates[0].state.action < min(sym)


def test_broom_multiplicity_flagged():
    rep = rank_candidates(NL4, RegularGraph(10, 1, 0, 0.47))
    inc = [c for c in rep.candidates if c.state.theta == 10.0]
    assert len(inc) >= 2
    assert rep.candidates[0].open_flag


@pytest.mark.parametrize("ell", [10.0, 15.0, 20.0])
@pytest.mark.parametrize("graph", [(1, 0, 1), (1, 2, 0), (2, 1, 0)])
def test_symmetric_lower_bound(graph, ell):
    g = RegularGraph(*graph, ell)
    bound = min(g.H, g.E / 2) * S_PHI - 0.05
    rep = rank_candidates(NL4, g)
    sym = [c.state for c in rep.candidates if c.state.core_symmetric]
    assert sym
    for s in sym:
        assert s.valid and s.action >= bound


@settings(max_examples=12, deadline=None)
@given(H=st.integers(1, 4), P=st.integers(1, 4), ell=st.floats(0.2, 8.0))
def test_level_identity(H, P, ell):
    g = RegularGraph(H, P, 0, ell)
    theta = H / P
    for z in solve_length(LengthQuery(NL4, theta, INCREASING, ell)).roots:
        st_ = build_core_symmetric(NL4, g, HalfLineSplit(H, 0), z)
        assert st_.valid
        for pr in st_.compact_profiles():
            assert abs(pr.level - (1 - theta**2) * potential(NL4, z)) < 1e-10
