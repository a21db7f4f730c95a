"""Hot loops: Euler-Maruyama path simulation and the fixed-step RK4 oracle.

Each kernel has a numba implementation (``*_nb``) and a numpy one
(``*_np``); the public wrappers dispatch through :mod:`spgame._accel`.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit
from .rng import normal_block_np, normals_nb, split_seed


# -- Euler-Maruyama on a linear closed loop ----------------------------------
#
#   x_{j+1} = x_j + h * Acl_j x_j + Sig * sqrt(h) * Z_j
#   I_q    += h/2 * (x_j' W_{j,q} x_j + x_{j+1}' W_{j+1,q} x_{j+1})
#
# Costs and deviation integrals are all quadratic forms in the state, so the
# caller folds gains into Acl and W once per time step. With ``sub > 1`` the
# normal Z_j is the scaled sum of the draws for fine steps j*sub .. j*sub+sub-1,
# so runs at h and h/sub see the same Brownian path.

@njit
def _quad(W, j, q, x):
    n = x.shape[0]
    acc = 0.0
    for a in range(n):
        row = 0.0
        for b in range(n):
            row += W[j, q, a, b] * x[b]
        acc += x[a] * row
    return acc


@njit
def simulate_nb(Acl, W, Sig, x0, h, k0, k1, paths, blowup, sub):
    n_steps = Acl.shape[0] - 1
    n = x0.shape[0]
    m = Sig.shape[1]
    nq = W.shape[1]
    n_paths = paths.shape[0]
    integrals = np.zeros((n_paths, nq))
    x_final = np.empty((n_paths, n))
    moments = np.zeros(n_steps + 1)
    sqh = np.sqrt(h)
    half_h = 0.5 * h
    x = np.empty(n)
    x_new = np.empty(n)
    z = np.empty(m)
    zf = np.empty(m)
    inv_sqrt_sub = 1.0 / np.sqrt(sub)
    prev = np.empty(nq)
    for i in range(n_paths):
        for a in range(n):
            x[a] = x0[a]
        sq = 0.0
        for a in range(n):
            sq += x[a] * x[a]
        moments[0] += sq
        for q in range(nq):
            prev[q] = _quad(W, 0, q, x)
        for j in range(n_steps):
            if sub == 1:
                normals_nb(k0, k1, paths[i], j, z)
            else:
                for c in range(m):
                    z[c] = 0.0
                for r in range(sub):
                    normals_nb(k0, k1, paths[i], j * sub + r, zf)
                    for c in range(m):
                        z[c] += zf[c]
                for c in range(m):
                    z[c] *= inv_sqrt_sub
            sq = 0.0
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += Acl[j, a, b] * x[b]
                noise = 0.0
                for c in range(m):
                    noise += Sig[a, c] * z[c]
                x_new[a] = x[a] + h * acc + sqh * noise
                sq += x_new[a] * x_new[a]
            if not sq <= blowup * blowup:
                return integrals, x_final, moments, i, j + 1
            moments[j + 1] += sq
            for a in range(n):
                x[a] = x_new[a]
            for q in range(nq):
                cur = _quad(W, j + 1, q, x)
                integrals[i, q] += half_h * (prev[q] + cur)
                prev[q] = cur
        for a in range(n):
            x_final[i, a] = x[a]
    return integrals, x_final, moments, -1, -1


def simulate_np(Acl, W, Sig, x0, h, k0, k1, paths, blowup, sub):
    n_steps = Acl.shape[0] - 1
    n_paths = paths.shape[0]
    m = Sig.shape[1]
    X = np.tile(np.asarray(x0, dtype=float), (n_paths, 1))
    moments = np.zeros(n_steps + 1)
    moments[0] = np.sum(X * X)
    prev = np.einsum("pa,qab,pb->pq", X, W[0], X)
    integrals = np.zeros((n_paths, W.shape[1]))
    sqh = np.sqrt(h)
    for j in range(n_steps):
        if sub == 1:
            Z = normal_block_np(k0, k1, paths, j, m)
        else:
            Z = normal_block_np(k0, k1, paths, j * sub, m)
            for r in range(1, sub):
                Z = Z + normal_block_np(k0, k1, paths, j * sub + r, m)
            Z = Z / np.sqrt(sub)
        X = X + h * (X @ Acl[j].T) + sqh * (Z @ Sig.T)
        sq = np.sum(X * X, axis=1)
        bad = ~(sq <= blowup * blowup)
        if np.any(bad):
            return integrals, X, moments, int(np.argmax(bad)), j + 1
        moments[j + 1] = np.sum(sq)
        cur = np.einsum("pa,qab,pb->pq", X, W[j + 1], X)
        integrals += 0.5 * h * (prev + cur)
        prev = cur
    return integrals, X, moments, -1, -1


def simulate_paths(Acl, W, Sig, x0, h, seed, paths, blowup=1e9, sub=1, backend=None):
    """Run the closed-loop Euler-Maruyama kernel.

    Returns ``(integrals[n_paths, nq], x_final[n_paths, n], sum_sq[n_steps+1],
    bad_path, bad_step)``; ``bad_path == -1`` when no path exceeded ``blowup``.
    ``sum_sq[j]`` is the sum over paths of ``|x_j|^2``.
    """
    k0, k1 = split_seed(seed)
    args = (
        np.ascontiguousarray(Acl, dtype=float),
        np.ascontiguousarray(W, dtype=float),
        np.ascontiguousarray(Sig, dtype=float),
        np.ascontiguousarray(x0, dtype=float),
        float(h), k0, k1,
        np.ascontiguousarray(paths, dtype=np.int64),
        float(blowup), int(sub),
    )
    if sub < 1:
        raise ValueError("sub must be a positive integer")
    if _accel.resolve(backend) == "numba":
        return simulate_nb(*args)
    return simulate_np(*args)


# -- fixed-step RK4 on the assembled n x n Riccati equation ------------------
#
# dP/ds = A'P + PA + PDP + Q,  s = T - t,  P(s=0) = 0,  D = -B R^{-1} B'.

@njit
def _riccati_field_nb(P, A, D, Q, out, tmp):
    n = P.shape[0]
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for c in range(n):
                acc += D[a, c] * P[c, b]
            tmp[a, b] = acc
    for a in range(n):
        for b in range(n):
            acc = Q[a, b]
            for c in range(n):
                acc += A[c, a] * P[c, b] + P[a, c] * A[c, b] + P[a, c] * tmp[c, b]
            out[a, b] = acc


@njit
def rk4_riccati_nb(A, D, Q, T, n_steps, stride):
    n = A.shape[0]
    h = T / n_steps
    n_out = n_steps // stride + 1
    out = np.zeros((n_out, n, n))
    P = np.zeros((n, n))
    k1 = np.empty((n, n))
    k2 = np.empty((n, n))
    k3 = np.empty((n, n))
    k4 = np.empty((n, n))
    tmp = np.empty((n, n))
    Y = np.empty((n, n))
    for j in range(n_steps):
        _riccati_field_nb(P, A, D, Q, k1, tmp)
        for a in range(n):
            for b in range(n):
                Y[a, b] = P[a, b] + 0.5 * h * k1[a, b]
        _riccati_field_nb(Y, A, D, Q, k2, tmp)
        for a in range(n):
            for b in range(n):
                Y[a, b] = P[a, b] + 0.5 * h * k2[a, b]
        _riccati_field_nb(Y, A, D, Q, k3, tmp)
        for a in range(n):
            for b in range(n):
                Y[a, b] = P[a, b] + h * k3[a, b]
        _riccati_field_nb(Y, A, D, Q, k4, tmp)
        for a in range(n):
            for b in range(n):
                P[a, b] += h / 6.0 * (k1[a, b] + 2.0 * k2[a, b] + 2.0 * k3[a, b] + k4[a, b])
        if (j + 1) % stride == 0:
            out[(j + 1) // stride] = P
    return out


def rk4_riccati_np(A, D, Q, T, n_steps, stride):
    n = A.shape[0]
    h = T / n_steps
    out = np.zeros((n_steps // stride + 1, n, n))
    P = np.zeros((n, n))
    At = A.T

    def field(P):
        return At @ P + P @ A + P @ D @ P + Q

    for j in range(n_steps):
        k1 = field(P)
        k2 = field(P + 0.5 * h * k1)
        k3 = field(P + 0.5 * h * k2)
        k4 = field(P + h * k3)
        P = P + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (j + 1) % stride == 0:
            out[(j + 1) // stride] = P
    return out


def rk4_riccati(A, D, Q, T, n_steps, stride=1, backend=None):
    """Brute-force backward RK4; row ``i`` of the result is ``P`` at ``s = i*stride*T/n_steps``."""
    if n_steps % stride:
        raise ValueError("stride must divide n_steps")
    args = (
        np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(D, dtype=float),
        np.ascontiguousarray(Q, dtype=float), float(T), int(n_steps), int(stride),
    )
    if _accel.resolve(backend) == "numba":
        return rk4_riccati_nb(*args)
    return rk4_riccati_np(*args)
