"""Shared fixtures: the scalar reference game, its solutions and random specs."""

from __future__ import annotations

import math

import numpy as np
import pytest

from spgame import (
    SpGameError, fixture_s1, make_spec, solve_boundary_layer, solve_full, solve_reduced,
)
from spgame.boundary import default_tau_max, select_delta

SQRT2 = math.sqrt(2.0)


def zero_cost_s1():
    return fixture_s1(Q1=0.0, Q2=0.0)


def random_blocks(rng: np.random.Generator, n1: int, n2: int, k1: int | None = None,
                  k2: int | None = None, T: float = 1.0) -> dict:
    """Random game data biased toward the minimising player.

    ``A`` blocks have a negative diagonal shift, ``B22`` is square and
    dominant so ``Delta2`` is negative definite, and ``B11`` is small so the
    slow Riccati equation behaves like a control problem.
    """
    k1 = n1 if k1 is None else k1
    k2 = n2 if k2 is None else k2
    g = rng.standard_normal

    def psd(n):
        L = g((n, n)) / math.sqrt(n)
        return L @ L.T + 0.1 * np.eye(n)

    return dict(
        A11=0.5 * g((n1, n1)) - np.eye(n1), A12=0.5 * g((n1, n2)),
        A21=0.5 * g((n2, n1)), A22=0.5 * g((n2, n2)) - 1.5 * np.eye(n2),
        B11=0.3 * g((n1, k1)), B12=g((n1, k2)) + np.eye(n1, k2),
        B21=0.2 * g((n2, k1)), B22=g((n2, k2)) * 0.3 + 1.5 * np.eye(n2, k2),
        sigma1=0.5 * g((n1, n1)), sigma2=0.5 * g((n2, n2)),
        Q1=psd(n1), Q2=psd(n2), T=T,
    )


def random_valid_specs(count: int, seed: int, max_dim: int = 4, T: float = 1.0):
    """``count`` random specs with ``n1, n2 <= max_dim`` whose reduced pipeline succeeds."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n1, n2 = (int(v) for v in rng.integers(1, max_dim + 1, size=2))
        spec = make_spec(**random_blocks(rng, n1, n2, T=T))
        try:
            red = solve_reduced(spec)
            select_delta(spec, red.P22bar)
        except SpGameError:
            continue
        out.append(spec)
    return out


@pytest.fixture(scope="session")
def s1():
    return fixture_s1()


@pytest.fixture(scope="session")
def red_s1(s1):
    return solve_reduced(s1)


@pytest.fixture(scope="session")
def layer_s1(s1, red_s1):
    delta = red_s1.gamma / 2
    return solve_boundary_layer(s1, red_s1, delta, default_tau_max(1e-3, s1.T, red_s1.gamma, delta))


@pytest.fixture(scope="session")
def full_s1_eps01(s1):
    return solve_full(s1, 0.1)


@pytest.fixture(scope="session")
def full_s1_eps1(s1):
    return solve_full(s1, 1.0)


@pytest.fixture(scope="session")
def sweep_s1(s1):
    from spgame.asymptotics import sweep

    return sweep(s1, x0=np.array([1.0, 1.0]))
