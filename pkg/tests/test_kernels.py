import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.linalg import expm

from spgame import _accel
from spgame._accel import ENV_FLAG, HAVE_NUMBA
from spgame.kernels import rk4_riccati, simulate_paths

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")


def _closed_loop(n=3, n_steps=400, nq=2, seed=0):
    rng = np.random.default_rng(seed)
    Acl = rng.standard_normal((n_steps + 1, n, n)) * 0.3 - np.eye(n)
    W = rng.standard_normal((n_steps + 1, nq, n, n))
    W = W + np.swapaxes(W, -1, -2)
    Sig = rng.standard_normal((n, 2)) * 0.5
    return Acl, W, Sig, rng.standard_normal(n)


@needs_numba
@pytest.mark.parametrize("sub", [1, 3])
def test_simulate_backends_agree(sub):
    Acl, W, Sig, x0 = _closed_loop()
    paths = np.arange(5, 205)
    a = simulate_paths(Acl, W, Sig, x0, 1e-3, 99, paths, sub=sub, backend="numpy")
    b = simulate_paths(Acl, W, Sig, x0, 1e-3, 99, paths, sub=sub, backend="numba")
    for u, v in zip(a[:3], b[:3]):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-13)
    assert a[3:] == b[3:] == (-1, -1)


@pytest.mark.parametrize("backend", ["numpy"] + (["numba"] if HAVE_NUMBA else []))
def test_simulate_noise_free_matches_euler_recursion(backend):
    Acl, W, _, x0 = _closed_loop(n_steps=50)
    Sig = np.zeros((3, 2))
    h = 0.01
    integ, xf, _, _, _ = simulate_paths(Acl, W, Sig, x0, h, 1, np.arange(3), backend=backend)
    x = x0.copy()
    acc = np.zeros(2)
    prev = np.einsum("a,qab,b->q", x, W[0], x)
    for j in range(50):
        x = x + h * Acl[j] @ x
        cur = np.einsum("a,qab,b->q", x, W[j + 1], x)
        acc += 0.5 * h * (prev + cur)
        prev = cur
    np.testing.assert_allclose(xf, np.tile(x, (3, 1)), rtol=1e-13)
    np.testing.assert_allclose(integ, np.tile(acc, (3, 1)), rtol=1e-12)


@pytest.mark.parametrize("backend", ["numpy"] + (["numba"] if HAVE_NUMBA else []))
def test_simulate_reports_blowup(backend):
    Acl = np.full((101, 1, 1), 500.0)
    W = np.zeros((101, 1, 1, 1))
    out = simulate_paths(Acl, W, np.zeros((1, 1)), np.ones(1), 0.01, 0, np.arange(2), backend=backend)
    assert out[3] == 0 and out[4] > 0


def test_rk4_linear_case_matches_expm():
    # D = 0: P(s) = int_0^s e^{A'r} Q e^{Ar} dr; compare through the Van Loan block exponential
    rng = np.random.default_rng(1)
    n = 3
    A = rng.standard_normal((n, n)) - 2 * np.eye(n)
    Q = np.eye(n)
    T = 1.5
    P = rk4_riccati(A, np.zeros((n, n)), Q, T, 3000, stride=3000, backend="numpy")[-1]
    H = np.block([[-A.T, Q], [np.zeros((n, n)), A]])
    E = expm(H * T)
    ref = E[n:, n:].T @ E[:n, n:]
    np.testing.assert_allclose(P, ref, atol=1e-11)


@needs_numba
def test_rk4_backends_agree():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((4, 4)) - np.eye(4)
    D = rng.standard_normal((4, 4)) * 0.1
    D = D + D.T
    Q = np.eye(4)
    a = rk4_riccati(A, D, Q, 1.0, 2000, stride=100, backend="numpy")
    b = rk4_riccati(A, D, Q, 1.0, 2000, stride=100, backend="numba")
    assert a.shape == (21, 4, 4)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


def test_rk4_stride_must_divide():
    with pytest.raises(ValueError):
        rk4_riccati(np.eye(1), np.eye(1), np.eye(1), 1.0, 10, stride=3)


def test_env_flag_selects_numpy():
    code = "from spgame import _accel; print(_accel.default_backend())"
    env = {**os.environ, ENV_FLAG: "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "numpy"


def test_resolve_validates_names():
    assert _accel.resolve("numpy") == "numpy"
    with pytest.raises(ValueError):
        _accel.resolve("cuda")
