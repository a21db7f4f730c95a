import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spgame import (
    BlowUp, Delta2Singular, NoStabilizingSolution, ToleranceConfig, delta_blocks, fixture_s1,
    full_rhs, make_spec, p12_bar, reduced_coefficients, solve_reduced, solve_reduced_are,
    solve_reduced_dre, verify_reduced_system,
)
from spgame.reduced import are_residual, newton_are
from spgame.scalar import scalar_dre_oracle

from conftest import SQRT2, random_blocks, random_valid_specs, zero_cost_s1


def test_are_s1(s1):
    P22, S = solve_reduced_are(s1)
    assert P22[0, 0] == pytest.approx(SQRT2 - 1, abs=1e-12)
    assert S[0, 0] == pytest.approx(-SQRT2, abs=1e-12)


def test_are_zero_q2_hurwitz_a22():
    P22, S = solve_reduced_are(fixture_s1(Q2=0.0))
    assert abs(P22[0, 0]) < 1e-14
    assert S[0, 0] == pytest.approx(-1.0, abs=1e-14)


def test_are_decoupled_two_by_two():
    spec = make_spec(
        A11=[[-1.0]], A12=[[0.0, 0.0]], A21=[[0.0], [0.0]], A22=np.diag([-1.0, -2.0]),
        B11=[[0.0, 0.0]], B12=[[0.0, 0.0]], B21=np.zeros((2, 2)), B22=np.eye(2),
        sigma1=[[1.0]], sigma2=np.eye(2), Q1=[[1.0]], Q2=np.eye(2), T=1.0,
    )
    P22, _ = solve_reduced_are(spec)
    np.testing.assert_allclose(P22, np.diag([SQRT2 - 1, math.sqrt(5) - 2]), atol=1e-12)


def test_are_rejects_singular_delta2():
    with pytest.raises(Delta2Singular) as info:
        solve_reduced_are(fixture_s1(B21=1.0, B22=1.0))
    assert info.value.assumption == "3.1"


def test_are_rejects_imaginary_axis_spectrum():
    # A22 = 0, Q2 = 0: the Hamiltonian has a double zero eigenvalue
    with pytest.raises(NoStabilizingSolution):
        solve_reduced_are(fixture_s1(A22=0.0, Q2=0.0))


def test_coefficients_s1(s1):
    P22, _ = solve_reduced_are(s1)
    At, M, N, Lam = reduced_coefficients(s1, P22)
    assert At[0, 0] == pytest.approx(-0.875, abs=1e-12)
    assert M[0, 0] == pytest.approx(-0.125, abs=1e-12)
    assert N[0, 0] == pytest.approx(1.125, abs=1e-12)
    assert Lam[0, 0] == pytest.approx(-2.0, abs=1e-12)


def test_coefficients_decoupled():
    spec = fixture_s1(A12=0.0, A21=0.0, B21=0.0, B12=0.0)
    d = delta_blocks(spec)
    assert d.Delta[0, 0] == 0.0
    At, M, N, _ = reduced_coefficients(spec)
    assert At[0, 0] == spec.A11[0, 0] and M[0, 0] == d.Delta1[0, 0] and N[0, 0] == spec.Q1[0, 0]


def test_lambda_inverse_identity_on_random_specs():
    for spec in random_valid_specs(20, seed=5):
        P22, S = solve_reduced_are(spec)
        _, _, _, Lam = reduced_coefficients(spec, P22)
        D2 = delta_blocks(spec).Delta2
        lhs = np.linalg.inv(Lam)
        rhs = np.linalg.inv(S) @ D2 @ np.linalg.inv(S).T
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * max(1.0, np.abs(lhs).max()))
        # Lambda equals S' Delta2^{-1} S
        np.testing.assert_allclose(Lam, S.T @ np.linalg.solve(D2, S), atol=1e-10 * np.abs(Lam).max())


def test_reduced_invariants_random():
    for spec in random_valid_specs(8, seed=6):
        red = solve_reduced(spec)
        assert np.linalg.norm(are_residual(red.P22bar, spec)) < 1e-10
        assert np.all(np.linalg.eigvals(red.S).real < 0)
        np.testing.assert_array_equal(red.M, red.M.T)
        np.testing.assert_array_equal(red.N, red.N.T)
        assert red.gamma > 0


def test_newton_idempotent(s1, red_s1):
    again = newton_are(s1, red_s1.P22bar)
    assert np.max(np.abs(again - red_s1.P22bar)) < 1e-12
    spec = random_valid_specs(1, seed=8)[0]
    P22, _ = solve_reduced_are(spec)
    assert np.max(np.abs(newton_are(spec, P22) - P22)) < 1e-12


def test_dre_zero_n_variant():
    spec = fixture_s1(Q1=0.0, A21=0.0)
    grid, P11, _ = solve_reduced_dre(spec, reduced_coefficients(spec))
    assert not np.any(P11)


def test_dre_matches_scalar_oracle(s1):
    coeffs = reduced_coefficients(s1)
    grid, P11, _ = solve_reduced_dre(s1, coeffs, ToleranceConfig(rel=1e-10, abs=1e-12))
    ref = scalar_dre_oracle(s1, coeffs, grid)
    assert np.max(np.abs(P11[:, 0, 0] - ref)) < 1e-8


def test_dre_no_escape_on_long_horizon_s1():
    for T in (8.0, 64.0):
        spec = fixture_s1(T=T)
        _, P11, _ = solve_reduced_dre(spec, reduced_coefficients(spec))
        assert np.all(np.isfinite(P11))


def test_dre_blowup_tagged():
    # Atilde = 0.4, M = 1, N = 1: complex pair, escape near s = 1.02
    spec = fixture_s1(A11=0.4, A12=0.0, A21=0.0, B11=1.0, B12=0.0, Q1=1.0, T=4.0)
    with pytest.raises(BlowUp) as info:
        solve_reduced_dre(spec, reduced_coefficients(spec))
    assert info.value.assumption == "3.2a"


def test_p12bar_examples(s1, red_s1):
    assert not np.any(p12_bar(np.zeros((1, 1)), red_s1.P22bar, fixture_s1(A21=0.0)))
    p = 0.37
    expected = -(0.5 * (SQRT2 - 1) + p * 1 + p * (-0.5) * (SQRT2 - 1)) / (-SQRT2)
    assert p12_bar(np.array([[p]]), red_s1.P22bar, s1)[0, 0] == pytest.approx(expected, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), frac=st.floats(0.0, 1.0))
def test_p12bar_zeroes_fast_cross_equation(seed, frac):
    spec = random_valid_specs(1, seed=seed)[0]
    red = solve_reduced(spec)
    t = frac * spec.T
    P11, P12 = red.dense_eval(t)
    _, g1, _ = full_rhs(P11[0], P12[0], red.P22bar, 0.0, spec)
    assert np.linalg.norm(g1) < 1e-9 * max(1.0, np.linalg.norm(P12))


def test_verify_reduced_system(s1, red_s1):
    r = verify_reduced_system(red_s1, s1)
    assert r[1] < 1e-9 and r[2] < 1e-9
    assert r[0] < 10 * ToleranceConfig().rel
    zc = zero_cost_s1()
    assert verify_reduced_system(solve_reduced(zc), zc) == (0.0, 0.0, 0.0)


def test_solution_constants(red_s1):
    c = red_s1.constants()
    assert c["gamma"] == pytest.approx(SQRT2, abs=1e-12)
    assert red_s1.P11bar[-1, 0, 0] == 0.0
    assert red_s1.p0 == pytest.approx(np.max(np.abs(red_s1.P11bar)), rel=1e-15)


def test_slow_state_dimension():
    """The slow Riccati integration carries only the n1 x n1 block."""
    spec = make_spec(**random_blocks(np.random.default_rng(2), 3, 2))
    red = solve_reduced(spec)
    assert red._traj.y.shape[1] == 9
