from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from knotgraph.length_functions import (
    DECREASING,
    INCREASING,
    L1,
    L2,
    LengthQuery,
    length_derivative,
    length_function,
    monotonicity_scan,
    regularized_derivative_sign,
    solve_length,
    threshold_decreasing,
    threshold_increasing,
)
from knotgraph.scalar_core import DomainError, Nonlinearity, potential, soliton_inverse

NL4 = Nonlinearity(4.0)
APEX = NL4.apex


def test_limits_and_identities():
    assert L1(NL4, 1.0, 1.0) == pytest.approx(math.acosh(math.sqrt(2.0)), rel=1e-12)
    assert L1(NL4, 0.0, 1 - 1e-8) == pytest.approx(math.pi / math.sqrt(2.0), abs=1e-4)
    assert L1(NL4, 0.5, APEX - 1e-10) < 1e-3
    assert L2(NL4, -0.5, 1e-8) == pytest.approx(math.asinh(1 / math.sqrt(3.0)), abs=1e-4)
    assert L2(NL4, 0.0, 1 + 1e-8) == pytest.approx(math.pi / math.sqrt(2.0), abs=1e-4)


def test_l2_diverges_at_apex():
    # the growth is logarithmic in the distance to the apex
    d = np.array([1e-4, 1e-6, 1e-8])
    vals = np.array([L2(NL4, -0.5, APEX - x) for x in d])
    assert np.all(np.diff(vals) > 1.0)
    steps = np.diff(vals)
    assert steps[0] == pytest.approx(steps[1], rel=0.05)
    assert vals[-1] > 10.0


def test_thresholds():
    assert threshold_increasing(NL4) == pytest.approx(2.221441469, abs=1e-9)
    assert threshold_decreasing(-0.5) == pytest.approx(0.549306144, abs=1e-9)
    assert threshold_decreasing(0.5) == threshold_decreasing(-0.5)


def test_domain_errors():
    with pytest.raises(DomainError):
        L1(NL4, -0.2, 0.5)
    with pytest.raises(DomainError):
        L2(NL4, 0.3, 0.5)
    with pytest.raises(DomainError):
        L1(NL4, 0.0, 1.2)
    with pytest.raises(DomainError):
        LengthQuery(NL4, -1.0, DECREASING, 1.0)


def test_regularized_derivative_examples():
    h = regularized_derivative_sign(NL4, 1.0, 0.8, INCREASING)
    assert h == pytest.approx(0.25 / math.sqrt(potential(NL4, 0.8)), rel=1e-10)
    fd = (L1(NL4, 0.5, 0.7 + 1e-5) - L1(NL4, 0.5, 0.7 - 1e-5)) / 2e-5
    assert np.sign(length_derivative(NL4, 0.5, 0.7, INCREASING)) == np.sign(fd)
    assert length_derivative(NL4, 0.5, 0.7, INCREASING) == pytest.approx(fd, rel=1e-6)
    assert regularized_derivative_sign(NL4, -0.5, 1.2, DECREASING) <= 0


def test_solve_length_examples():
    rs = solve_length(LengthQuery(NL4, 1.0, INCREASING, 1.0))
    assert rs.roots == pytest.approx((math.sqrt(2.0) / math.cosh(1.0),), rel=1e-12)
    assert not rs.multiplicity_flag
    assert solve_length(LengthQuery(NL4, -0.5, DECREASING, 0.4)).roots == ()


def test_fold_for_large_theta():
    v = monotonicity_scan(NL4, 10.0, INCREASING, (1.0, APEX - 0.01), n=400)
    assert v.kind == "non-monotone"
    lo, hi = v.fold_window
    rs = solve_length(LengthQuery(NL4, 10.0, INCREASING, 0.5 * (lo + hi)))
    assert len(rs.roots) >= 2 and rs.multiplicity_flag
    assert all(1.0 < r < APEX for r in rs.roots[1:])


def test_monotonicity_examples():
    assert monotonicity_scan(NL4, 0.5, INCREASING, (0.01, APEX - 0.01)).kind == "strictly-decreasing"
    assert monotonicity_scan(NL4, 2.0, INCREASING, (1.0, APEX - 0.01)).kind == "strictly-decreasing"


@settings(max_examples=25, deadline=None)
@given(p=st.sampled_from([3.0, 4.0, 6.0]), frac=st.floats(0.001, 0.999))
def test_theta_one_identity(p, frac):
    nl = Nonlinearity(p)
    z = frac * nl.apex
    assert L1(nl, 1.0, z) == pytest.approx(soliton_inverse(nl, z), rel=1e-10, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0.05, 3.0), frac=st.floats(0.05, 0.95))
def test_derivative_matches_finite_difference(theta, frac):
    z = frac * APEX
    if abs(z - 1.0) < 1e-3:
        z += 2e-3
    h = 1e-6
    fd = (L1(NL4, theta, z + h) - L1(NL4, theta, z - h)) / (2 * h)
    assert length_derivative(NL4, theta, z, INCREASING) == pytest.approx(fd, rel=1e-4, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(-0.95, -0.05), frac=st.floats(0.05, 0.95))
def test_decreasing_branch_derivative(theta, frac):
    z = frac * APEX
    if abs(z - 1.0) < 1e-3:
        z += 2e-3
    h = 1e-6
    fd = (L2(NL4, theta, z + h) - L2(NL4, theta, z - h)) / (2 * h)
    assert length_derivative(NL4, theta, z, DECREASING) == pytest.approx(fd, rel=1e-4, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(theta=st.floats(0.05, 2.0), ell=st.floats(0.2, 6.0))
def test_roots_solve_the_length_equation(theta, ell):
    rs = solve_length(LengthQuery(NL4, theta, INCREASING, ell))
    # unique increasing root for theta in (0, 2]
    assert len(rs.roots) == 1
    assert length_function(NL4, theta, INCREASING, rs.roots[0]) == pytest.approx(ell, abs=1e-9)
