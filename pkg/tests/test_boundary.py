import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spgame import (
    AssumptionFailed, attraction_check, default_tau_max, fixture_s1, full_rhs, gamma_margin,
    h_map, p12_bar, phi_map, select_delta, solve_boundary_layer, solve_reduced,
)
from spgame.boundary import layer_rhs
from spgame.model import GameSpec, delta_blocks
from spgame.scalar import scalar_layer_oracle

from conftest import SQRT2, random_valid_specs, zero_cost_s1

H0 = (SQRT2 - 1) / (2 * SQRT2)


def _with_a22(S):
    """A spec whose P22bar = 0 leaves S = A22 (zero Q2, identity Delta2 block)."""
    n2 = S.shape[0]
    return GameSpec(
        A11=[[-1.0]], A12=np.zeros((1, n2)), A21=np.zeros((n2, 1)), A22=S,
        B11=[[0.0]], B12=[[0.0]], B21=np.zeros((n2, 1)), B22=np.eye(n2)[:, :1],
        sigma1=[[1.0]], sigma2=np.eye(n2), Q1=[[1.0]], Q2=np.zeros((n2, n2)), T=1.0,
    )


def test_h_map_examples(s1, red_s1):
    zero = np.zeros((1, 1))
    spec = fixture_s1(A12=0.0, A21=0.0)
    assert not np.any(h_map(np.array([[0.7]]), np.zeros((1, 1)), spec))
    assert h_map(zero, red_s1.P22bar, s1)[0, 0] == pytest.approx(H0, abs=1e-12)
    assert np.array_equal(h_map(red_s1.P11bar, red_s1.P22bar, s1),
                          p12_bar(red_s1.P11bar, red_s1.P22bar, s1))


def test_phi_map_examples(s1, red_s1):
    assert phi_map(np.zeros((1, 1)), s1, red_s1.P22bar)[0, 0] == pytest.approx(0.5 - H0, abs=1e-12)
    # A21 = 0 and P22bar = 0 make h(0) = 0
    assert not np.any(phi_map(np.zeros((1, 1)), fixture_s1(A21=0.0), np.zeros((1, 1))))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_phi_minus_phi0_is_linear(seed):
    spec = random_valid_specs(1, seed=seed)[0]
    red = solve_reduced(spec)
    rng = np.random.default_rng(seed)
    n1 = spec.n1
    X, Y = rng.standard_normal((2, n1, n1))
    a, b = rng.standard_normal(2)
    base = phi_map(np.zeros((n1, n1)), spec, red.P22bar)
    lin = lambda P: phi_map(P, spec, red.P22bar) - base
    np.testing.assert_allclose(lin(a * X + b * Y), a * lin(X) + b * lin(Y), atol=1e-11)


def test_gamma_margin_examples(s1, red_s1):
    assert gamma_margin(s1, red_s1.P22bar) == pytest.approx(SQRT2, abs=1e-12)
    assert gamma_margin(_with_a22(np.diag([-1.0, -3.0])), np.zeros((2, 2))) == pytest.approx(1.0)
    with pytest.raises(AssumptionFailed) as info:
        gamma_margin(_with_a22(np.array([[-1.0, 10.0], [0.0, -1.0]])), np.zeros((2, 2)))
    assert info.value.assumption == "4.1"


def test_attraction_check_examples(s1, red_s1):
    ok, q2 = attraction_check(s1, red_s1.P22bar, SQRT2 / 2)
    assert ok and q2 == pytest.approx(1.5 * SQRT2, abs=1e-12)
    zc = zero_cost_s1()
    red = solve_reduced(zc)
    for delta in (0.1, 0.5, 0.9):
        assert attraction_check(zc, red.P22bar, delta * red.gamma)[0]
    with pytest.raises(ValueError):
        attraction_check(s1, red_s1.P22bar, 2.0)


def test_attraction_radius_shrinks_with_delta2_scale(s1, red_s1):
    # scaling B21, B22 by 10 scales Delta2 by 100 at fixed (S, P22bar)
    _, q2 = attraction_check(s1, red_s1.P22bar, SQRT2 / 2)
    big = s1.replace(B21=s1.B21 * 10, B22=s1.B22 * 10)
    d2 = delta_blocks(big).Delta2
    op = float(np.linalg.norm(d2, 2))
    assert op == pytest.approx(100.0)
    assert (SQRT2 + SQRT2 / 2) / op == pytest.approx(q2 / 100)
    assert q2 / 100 < SQRT2 - 1  # so the certificate fails at that scale


def test_select_delta_default_and_failure(s1, red_s1):
    assert select_delta(s1, red_s1.P22bar) == pytest.approx(red_s1.gamma / 2)
    # Delta2 scaled by 100 with A22 compensated so that S stays at -sqrt(2)
    big = s1.replace(B21=s1.B21 * 10, B22=s1.B22 * 10,
                     A22=np.array([[-SQRT2 + 100 * (SQRT2 - 1)]]))
    assert gamma_margin(big, red_s1.P22bar) == pytest.approx(SQRT2)
    with pytest.raises(AssumptionFailed) as info:
        select_delta(big, red_s1.P22bar)
    assert info.value.assumption == "4.2"
    with pytest.raises(AssumptionFailed):
        select_delta(big, red_s1.P22bar, SQRT2 / 2)


def test_default_tau_max_examples():
    gamma = 1.4
    assert default_tau_max(0.1, 2.0, gamma, gamma - 0.7) == pytest.approx(60 / 0.7)
    assert default_tau_max(1e-4, 2.0, 1.4, 0.7) == pytest.approx(20000.0)
    assert default_tau_max(0.1, 2.0, math.inf, 1.0) == pytest.approx(20.0)


def test_origin_is_equilibrium(s1, red_s1):
    S = red_s1.S
    a, b = layer_rhs(np.zeros((1, 1)), np.zeros((1, 1)), S, np.ones((1, 1)), np.ones((1, 1)) * -1)
    assert not np.any(a) and not np.any(b)


def test_layer_consistent_with_are(s1, red_s1):
    _, _, g2 = full_rhs(np.zeros((1, 1)), np.zeros((1, 1)), red_s1.P22bar, 0.0, s1)
    assert np.linalg.norm(g2) < 1e-10


def test_zero_cost_layer_vanishes():
    zc = zero_cost_s1()
    red = solve_reduced(zc)
    bl = solve_boundary_layer(zc, red, None, 20.0)
    assert not np.any(bl.P12hat) and not np.any(bl.P22hat)


def test_initial_data_and_decay_s1(s1, red_s1):
    delta = red_s1.gamma / 2
    bl = solve_boundary_layer(s1, red_s1, delta, 20.0)
    assert bl.P22hat[0, 0, 0] == -red_s1.P22bar[0, 0]
    assert bl.P12hat[0, 0, 0] == -h_map(np.zeros((1, 1)), red_s1.P22bar, s1)[0, 0]
    bound = math.exp(-(red_s1.gamma - delta) * 20) * (SQRT2 - 1)
    assert abs(bl.P22hat[-1, 0, 0]) <= bound
    assert bound < 1e-6


def test_envelopes_and_monotonicity(layer_s1):
    assert layer_s1.envelope_violations() == (0, 0)
    n22 = np.linalg.norm(layer_s1.P22hat, axis=(1, 2))
    assert np.all(np.diff(n22) <= 0)


def test_envelope_constants(s1, red_s1, layer_s1):
    bl = layer_s1
    gd = bl.gamma - bl.delta
    assert bl.k1 == pytest.approx(math.exp(1.0 * bl.q2 / gd), rel=1e-14)
    assert bl.k2 == pytest.approx(bl.phi0_norm * bl.q2 / bl.delta * bl.k1, rel=1e-14)


def test_layer_matches_bernoulli_oracle(s1, red_s1, layer_s1):
    bl = layer_s1
    tau = bl.tau_grid[bl.tau_grid <= 40]
    Phi0 = phi_map(np.zeros((1, 1)), s1, red_s1.P22bar)[0, 0]
    q, p = scalar_layer_oracle(red_s1.S[0, 0], -1.0, Phi0, -H0, -(SQRT2 - 1), tau)
    n = len(tau)
    assert np.max(np.abs(bl.P22hat[:n, 0, 0] - p)) < 1e-8
    assert np.max(np.abs(bl.P12hat[:n, 0, 0] - q)) < 1e-8


def test_random_specs_respect_envelopes():
    for spec in random_valid_specs(4, seed=21):
        red = solve_reduced(spec)
        bl = solve_boundary_layer(spec, red)
        assert bl.envelope_violations() == (0, 0)
