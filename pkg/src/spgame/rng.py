"""Counter-based Gaussian stream.

Draw ``(seed, path, step, channel)`` is a pure function of its arguments:
Philox4x32-10 is applied to the counter ``(channel // 2, step, path_lo,
path_hi)`` under the 64-bit key ``seed``; the four output words give two
53-bit uniforms in ``(0, 1)`` which are pushed through the inverse normal
CDF (Wichura's AS241, ~1e-16 relative accuracy). No rejection sampling is
involved, so the stream does not depend on how many draws precede it.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit

MASK32 = np.uint64(0xFFFFFFFF)
PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
SHIFT32 = np.uint64(32)
SHIFT21 = np.uint64(21)
SHIFT11 = np.uint64(11)
TWO_M53 = 2.0 ** -53

_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)

A0, A1, A2, A3, A4, A5, A6, A7 = _A
B1, B2, B3, B4, B5, B6, B7 = _B[1:]
C0, C1, C2, C3, C4, C5, C6, C7 = _C
D1, D2, D3, D4, D5, D6, D7 = _D[1:]
E0, E1, E2, E3, E4, E5, E6, E7 = _E
F1, F2, F3, F4, F5, F6, F7 = _F[1:]


def split_seed(seed: int) -> tuple[np.uint64, np.uint64]:
    seed = int(seed)
    if not (0 <= seed < 2 ** 64):
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


# -- numba scalar kernels ---------------------------------------------------

@njit
def philox4x32_nb(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        hi0 = p0 >> SHIFT32
        lo0 = p0 & MASK32
        hi1 = p1 >> SHIFT32
        lo1 = p1 & MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


@njit
def ndtri_nb(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((A7 * r + A6) * r + A5) * r + A4) * r + A3) * r + A2) * r + A1) * r + A0)
        den = (((((((B7 * r + B6) * r + B5) * r + B4) * r + B3) * r + B2) * r + B1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        val = ((((((((C7 * r + C6) * r + C5) * r + C4) * r + C3) * r + C2) * r + C1) * r + C0)
               / (((((((D7 * r + D6) * r + D5) * r + D4) * r + D3) * r + D2) * r + D1) * r + 1.0))
    else:
        r -= 5.0
        val = ((((((((E7 * r + E6) * r + E5) * r + E4) * r + E3) * r + E2) * r + E1) * r + E0)
               / (((((((F7 * r + F6) * r + F5) * r + F4) * r + F3) * r + F2) * r + F1) * r + 1.0))
    return -val if q < 0.0 else val


@njit
def normals_nb(k0, k1, path, step, out):
    """Fill ``out`` (one entry per channel) for a single (path, step)."""
    m = out.shape[0]
    plo = np.uint64(path) & MASK32
    phi = np.uint64(path) >> SHIFT32
    st = np.uint64(step)
    for b in range((m + 1) // 2):
        x0, x1, x2, x3 = philox4x32_nb(np.uint64(b), st, plo, phi, k0, k1)
        u = (np.float64((x0 << SHIFT21) | (x1 >> SHIFT11)) + 0.5) * TWO_M53
        out[2 * b] = ndtri_nb(u)
        if 2 * b + 1 < m:
            u = (np.float64((x2 << SHIFT21) | (x3 >> SHIFT11)) + 0.5) * TWO_M53
            out[2 * b + 1] = ndtri_nb(u)


@njit
def normal_block_nb(k0, k1, paths, step, m):
    out = np.empty((paths.shape[0], m))
    row = np.empty(m)
    for i in range(paths.shape[0]):
        normals_nb(k0, k1, paths[i], step, row)
        out[i, :] = row
    return out


# -- numpy vectorised kernels -----------------------------------------------

def philox4x32_np(c0, c1, c2, c3, k0, k1):
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = (p1 >> SHIFT32) ^ c1 ^ k0, p1 & MASK32, (p0 >> SHIFT32) ^ c3 ^ k1, p0 & MASK32
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


def _poly(coeffs, r):
    acc = np.full_like(r, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * r + c
    return acc


def ndtri_np(p):
    p = np.asarray(p, dtype=float)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def normal_block_np(k0, k1, paths, step, m):
    paths = np.asarray(paths, dtype=np.uint64)
    plo = paths & MASK32
    phi = paths >> SHIFT32
    st = np.full(paths.shape, step, dtype=np.uint64)
    out = np.empty((paths.shape[0], m))
    for b in range((m + 1) // 2):
        x0, x1, x2, x3 = philox4x32_np(np.full(paths.shape, b, dtype=np.uint64), st, plo, phi, k0, k1)
        u = (((x0 << SHIFT21) | (x1 >> SHIFT11)).astype(np.float64) + 0.5) * TWO_M53
        out[:, 2 * b] = ndtri_np(u)
        if 2 * b + 1 < m:
            u = (((x2 << SHIFT21) | (x3 >> SHIFT11)).astype(np.float64) + 0.5) * TWO_M53
            out[:, 2 * b + 1] = ndtri_np(u)
    return out


# -- public API -------------------------------------------------------------

def philox4x32(counter, key, backend: str | None = None):
    """Philox4x32-10 block function on one 4-word counter and 2-word key."""
    c = [np.uint64(v) for v in counter]
    k = [np.uint64(v) for v in key]
    if _accel.resolve(backend) == "numba":
        return tuple(int(v) for v in philox4x32_nb(c[0], c[1], c[2], c[3], k[0], k[1]))
    return tuple(int(v) for v in philox4x32_np(*c, *k))


def ndtri(p, backend: str | None = None):
    p = np.asarray(p, dtype=float)
    if _accel.resolve(backend) == "numba":
        flat = p.ravel()
        out = np.empty_like(flat)
        for i in range(flat.size):
            out[i] = ndtri_nb(flat[i])
        return out.reshape(p.shape)
    return ndtri_np(p)


def gaussian_block(seed: int, paths, step: int, m: int, backend: str | None = None) -> np.ndarray:
    """Standard normals for every path in ``paths`` at ``step``; shape ``(len(paths), m)``."""
    k0, k1 = split_seed(seed)
    paths = np.ascontiguousarray(np.atleast_1d(paths), dtype=np.int64)
    if np.any(paths < 0):
        raise ValueError("path indices must be non-negative")
    if _accel.resolve(backend) == "numba":
        return normal_block_nb(k0, k1, paths, int(step), int(m))
    return normal_block_np(k0, k1, paths, int(step), int(m))
