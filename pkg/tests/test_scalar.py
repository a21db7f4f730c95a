import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.integrate import solve_ivp

from spgame import (
    BlowUp, ConditionFailed, NotScalar, fixture_s1, make_spec, reduced_coefficients,
    scalar_are_roots, scalar_conditions, scalar_dre_oracle,
)
from spgame.scalar import dre_escape_s, scalar_coefficients, scalar_dre_closed_form

from conftest import SQRT2, random_blocks

finite = dict(allow_nan=False, allow_infinity=False)


def test_coefficients_s1(s1):
    At, M, N = scalar_coefficients(s1)
    assert (At, M, N) == pytest.approx((-0.875, -0.125, 1.125), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_scalar_formulas_agree_with_matrix_route(seed):
    """The 1-D reductions and the general matrix formulas are independent routes."""
    rng = np.random.default_rng(seed)
    spec = make_spec(**random_blocks(rng, 1, 1))
    At, M, N = scalar_coefficients(spec)
    At2, M2, N2, _ = reduced_coefficients(spec)
    scale = 1 + abs(At) + abs(M) + abs(N)
    assert At2[0, 0] == pytest.approx(At, abs=1e-12 * scale)
    assert M2[0, 0] == pytest.approx(M, abs=1e-12 * scale)
    assert N2[0, 0] == pytest.approx(N, abs=1e-12 * scale)


def test_conditions_s1(s1):
    c = scalar_conditions(s1)
    assert c.cond_dre_a and c.cond_are and c.dre_ok and c.dre_global
    assert c.discriminant == pytest.approx(0.90625, abs=1e-14)
    lo, hi = c.region_lo_hi
    assert lo == pytest.approx(-2 * SQRT2, abs=1e-12) and hi == math.inf


def test_conditions_flags():
    c = scalar_conditions(fixture_s1(Q2=-1.0))
    assert not c.cond_are and math.isnan(c.region_lo_hi[0])
    # B11 = B12 = A12 = 0 gives Delta1 = Delta = 0 and M = 0: the discriminant is At^2
    spec = fixture_s1(B11=0.0, B12=0.0, A12=0.0)
    At, M, N = scalar_coefficients(spec)
    assert M == 0.0
    assert scalar_conditions(spec).cond_dre_a


def test_not_scalar_rejected():
    spec = make_spec(**random_blocks(np.random.default_rng(0), 2, 1))
    with pytest.raises(NotScalar):
        scalar_conditions(spec)


def test_are_roots(s1):
    stab, unstab = scalar_are_roots(s1)
    assert stab == pytest.approx(SQRT2 - 1, abs=1e-14)
    assert unstab == pytest.approx(-(SQRT2 + 1), abs=1e-14)
    assert -1 + (-1) * stab == pytest.approx(-SQRT2, abs=1e-14)
    # Q2 = 0: -P^2 - 2P = 0 has roots 0 (stabilising, S = A22) and -2
    stab, unstab = scalar_are_roots(fixture_s1(Q2=0.0))
    assert (stab, unstab) == (0.0, -2.0)
    # A22^2 = Delta2 Q2: double root with S = 0, not stabilising
    with pytest.raises(ConditionFailed) as info:
        scalar_are_roots(fixture_s1(Q2=-1.0))
    assert info.value.assumption == "3.2b"
    with pytest.raises(ConditionFailed):
        scalar_are_roots(fixture_s1(B21=1.0))


@settings(max_examples=100, deadline=None)
@given(a22=st.floats(-5, 5, **finite), b21=st.floats(-2, 2, **finite),
       b22=st.floats(-2, 2, **finite), q2=st.floats(-3, 3, **finite))
def test_are_root_properties(a22, b21, b22, q2):
    spec = fixture_s1(A22=a22, B21=b21, B22=b22, Q2=q2)
    c = scalar_conditions(spec)
    d2 = b21 ** 2 - b22 ** 2
    assume(c.cond_are and abs(d2) > 1e-3 and abs(q2) > 1e-6)
    stab, unstab = scalar_are_roots(spec)
    scale = 1 + abs(d2) * (stab ** 2 + unstab ** 2) + abs(a22) * (abs(stab) + abs(unstab)) + abs(q2)
    for r in (stab, unstab):
        assert abs(d2 * r * r + 2 * a22 * r + q2) < 1e-12 * scale
    S = a22 + d2 * stab
    assert S < 0
    # the root gap is the region edge and both +-stab lie inside the region
    assert unstab - stab == pytest.approx(-2 * S / d2, rel=1e-12, abs=1e-12)
    lo, hi = c.region_lo_hi
    assert lo < -stab < hi and lo < stab < hi or stab == 0


def test_oracle_trivial_cases(s1):
    spec = fixture_s1(Q1=0.0, A21=0.0)
    assert not np.any(scalar_dre_oracle(spec, t=np.linspace(0, 2, 5)))
    # M = 0: linear ODE, P = N/(2 At) (exp(2 At (T - t)) - 1)
    At, N, T = -0.8, 1.3, 2.0
    t = np.linspace(0, T, 9)
    P = scalar_dre_oracle(s1, (At, 0.0, N), t)
    np.testing.assert_allclose(P, N / (2 * At) * (np.exp(2 * At * (T - t)) - 1), rtol=1e-13)


@pytest.mark.parametrize("coeffs", [(-0.875, -0.125, 1.125), (0.3, 1.0, 0.09), (0.2, 1.0, 1.0),
                                    (-0.5, 2.0, -0.3), (0.9, -1.0, 0.4)])
def test_closed_form_three_regimes_vs_ode(coeffs):
    At, M, N = coeffs
    s_star = dre_escape_s(At, M, N)
    s_end = min(2.0, 0.9 * s_star)
    sol = solve_ivp(lambda s, p: M * p * p + 2 * At * p + N, (0, s_end), [0.0],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    s = np.linspace(0, s_end, 50)
    np.testing.assert_allclose(scalar_dre_closed_form(At, M, N, s), sol.sol(s)[0],
                               rtol=1e-9, atol=1e-11)


def test_escape_time_matches_pole():
    # At = 0, M = N = 1: P = tan(s), pole at pi/2
    assert dre_escape_s(0.0, 1.0, 1.0) == pytest.approx(math.pi / 2)
    assert dre_escape_s(1.0, 1.0, 1.0) == pytest.approx(1.0)  # double root: 1/At
    assert dre_escape_s(-1.0, 1.0, 0.5) == math.inf
    k = math.sqrt(0.25)
    assert dre_escape_s(1.0, 1.0, 0.75) == pytest.approx(math.log((1 + k) / (1 - k)) / (2 * k))


def test_stated_condition_is_not_sufficient():
    """At = 0, M = N = 1 passes the second condition yet escapes at s = pi/2."""
    spec = fixture_s1(T=4.0)
    with pytest.raises(BlowUp):
        scalar_dre_oracle(spec, (0.0, 1.0, 1.0), 0.0)


def test_oracle_rejects_when_both_conditions_fail(s1):
    with pytest.raises(ConditionFailed) as info:
        scalar_dre_oracle(s1, (2.0, 1.0, 5.0))
    assert info.value.assumption == "3.2a"
