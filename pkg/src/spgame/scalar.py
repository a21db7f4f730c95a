"""Closed forms for the scalar game (every dimension equal to one).

In one dimension the reduced coefficients, the fast ARE roots, the slow
Riccati trajectory and the boundary-layer trajectories are all explicit,
which makes this module the reference oracle for the numerical solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, ConditionFailed, NotScalar
from .model import GameSpec, delta_blocks

_DOUBLE_ROOT_RTOL = 1e-12


def _require_scalar(spec: GameSpec) -> None:
    if any(d != 1 for d in spec.dims):
        raise NotScalar(f"all dimensions must equal 1, got {spec.dims}")


def _scalars(spec: GameSpec) -> dict:
    _require_scalar(spec)
    d = delta_blocks(spec)
    out = {k: float(getattr(spec, k)[0, 0]) for k in ("A11", "A12", "A21", "A22", "Q1", "Q2")}
    out.update(D1=float(d.Delta1[0, 0]), D=float(d.Delta[0, 0]), D2=float(d.Delta2[0, 0]))
    return out


def scalar_coefficients(spec: GameSpec) -> tuple[float, float, float]:
    """``(Atilde, M, N)`` from the explicit scalar reductions.

    With ``r = A22^2 - Delta2 Q2``::

        Atilde = A11 + (Delta Q2 A21 - A12 A21 A22) / r
        M      = Delta1 + (Delta2 A12^2 - 2 Delta A12 A22 + Delta^2 Q2) / r
        N      = Q1 + Q2 A21^2 / r
    """
    c = _scalars(spec)
    r = c["A22"] ** 2 - c["D2"] * c["Q2"]
    if r == 0.0:
        raise ConditionFailed("A22^2 - Delta2 Q2 vanishes")
    At = c["A11"] + (c["D"] * c["Q2"] * c["A21"] - c["A12"] * c["A21"] * c["A22"]) / r
    M = c["D1"] + (c["D2"] * c["A12"] ** 2 - 2 * c["D"] * c["A12"] * c["A22"] + c["D"] ** 2 * c["Q2"]) / r
    N = c["Q1"] + c["Q2"] * c["A21"] ** 2 / r
    return At, M, N


@dataclass(frozen=True)
class ScalarConditions:
    """Scalar solvability flags.

    ``cond_dre_a or cond_dre_b`` is the stated predicate for the slow DRE.
    ``dre_global`` is the exact condition for the slow DRE to have no finite
    escape on any horizon (``Atilde^2 - MN >= 0`` *and*
    ``Atilde <= sqrt(Atilde^2 - MN)``, or ``N = 0``).
    """

    cond_dre_a: bool
    cond_dre_b: bool
    cond_are: bool
    region_lo_hi: tuple[float, float]
    discriminant: float
    dre_global: bool

    @property
    def dre_ok(self) -> bool:
        return self.cond_dre_a or self.cond_dre_b

    def to_dict(self) -> dict:
        return {
            "cond_dre_a": self.cond_dre_a, "cond_dre_b": self.cond_dre_b,
            "cond_are": self.cond_are, "region_lo_hi": list(self.region_lo_hi),
            "discriminant": self.discriminant, "dre_global": self.dre_global,
        }


def _dre_flags(At: float, M: float, N: float) -> tuple[bool, bool, bool, float]:
    disc = At * At - M * N
    a = disc >= 0.0
    b = At - math.sqrt(abs(disc)) <= 0.0
    glob = N == 0.0 or (a and At <= math.sqrt(max(disc, 0.0)))
    return a, b, glob, disc


def scalar_conditions(spec: GameSpec) -> ScalarConditions:
    """Evaluate the scalar solvability conditions and the limiting attraction interval.

    The interval is ``(-2S/Delta2, inf)`` for ``Delta2 < 0`` and
    ``(-inf, -2S/Delta2)`` for ``Delta2 > 0``, with ``S`` built from the
    stabilising ARE root; it is ``(nan, nan)`` when that root is undefined.
    When ``A22^2 = Delta2 Q2`` the slow coefficients are undefined and both
    DRE flags are reported false.
    """
    c = _scalars(spec)
    if c["A22"] ** 2 - c["D2"] * c["Q2"] == 0.0:
        # Lambda is singular: the slow coefficients are undefined
        a = b = glob = False
        disc = math.nan
    else:
        a, b, glob, disc = _dre_flags(*scalar_coefficients(spec))
    cond_are = c["D2"] * c["Q2"] < 0.0
    region = (math.nan, math.nan)
    if _has_stabilising_root(c):
        stab, _ = scalar_are_roots(spec)
        S = c["A22"] + c["D2"] * stab
        edge = -2.0 * S / c["D2"]
        region = (edge, math.inf) if c["D2"] < 0 else (-math.inf, edge)
    return ScalarConditions(a, b, cond_are, region, disc, glob)


def _has_stabilising_root(c: dict) -> bool:
    return c["D2"] != 0.0 and c["A22"] ** 2 - c["D2"] * c["Q2"] > 0.0


def scalar_are_roots(spec: GameSpec) -> tuple[float, float]:
    """Stabilising and unstable roots of ``Delta2 P^2 + 2 A22 P + Q2 = 0``.

    ``Delta2 Q2 < 0`` guarantees them, but the stabilising root exists as
    soon as ``A22^2 - Delta2 Q2 > 0`` (then ``S = -sqrt(A22^2 - Delta2 Q2)``),
    so e.g. ``Q2 = 0`` with ``A22 < 0`` gives the root ``0``.

    Raises
    ------
    ConditionFailed
        ``Delta2 = 0`` or ``A22^2 - Delta2 Q2 <= 0``.
    """
    c = _scalars(spec)
    if not _has_stabilising_root(c):
        raise ConditionFailed(
            "no stabilising root: need Delta2 != 0 and A22^2 - Delta2 Q2 > 0", assumption="3.2b"
        )
    root = math.sqrt(c["A22"] ** 2 - c["D2"] * c["Q2"])
    stab = (-c["A22"] - root) / c["D2"]
    unstab = (-c["A22"] + root) / c["D2"]
    return stab, unstab


def dre_escape_s(At: float, M: float, N: float) -> float:
    """Backward time ``s = T - t`` at which the slow scalar DRE escapes (``inf`` if never)."""
    if N == 0.0:
        return math.inf
    disc = At * At - M * N
    scale = max(At * At, abs(M * N), 1e-300)
    if abs(disc) <= _DOUBLE_ROOT_RTOL * scale:
        return 1.0 / At if At > 0 else math.inf
    if disc > 0:
        kappa = math.sqrt(disc)
        if At <= kappa:
            return math.inf
        return math.log((At + kappa) / (At - kappa)) / (2.0 * kappa)
    omega = math.sqrt(-disc)
    return (0.5 * math.pi - math.atan(At / omega)) / omega


def scalar_dre_closed_form(At: float, M: float, N: float, s) -> np.ndarray:
    """``P(s)`` solving ``dP/ds = M P^2 + 2 At P + N``, ``P(0) = 0``.

    Three regimes by the sign of ``disc = At^2 - MN``::

        disc > 0:  N sinh(k s) / (k cosh(k s) - At sinh(k s)),  k = sqrt(disc)
        disc = 0:  N s / (1 - At s)
        disc < 0:  N sin(w s) / (w cos(w s) - At sin(w s)),     w = sqrt(-disc)

    The hyperbolic branch is evaluated in a decaying-exponential form.
    """
    s = np.asarray(s, dtype=float)
    if N == 0.0:
        return np.zeros_like(s)
    disc = At * At - M * N
    scale = max(At * At, abs(M * N), 1e-300)
    if abs(disc) <= _DOUBLE_ROOT_RTOL * scale:
        return N * s / (1.0 - At * s)
    if disc > 0:
        k = math.sqrt(disc)
        e = np.exp(-2.0 * k * s)
        return N * (1.0 - e) / ((k - At) + (k + At) * e)
    w = math.sqrt(-disc)
    return N * np.sin(w * s) / (w * np.cos(w * s) - At * np.sin(w * s))


def scalar_dre_oracle(spec: GameSpec, coeffs=None, t=0.0):
    """Closed-form slow reduced Riccati solution at time(s) ``t`` in ``[0, T]``.

    ``coeffs`` is ``(Atilde, M, N)`` (extra entries ignored); by default the
    explicit scalar reductions are used.

    Raises
    ------
    ConditionFailed
        Neither stated scalar solvability condition holds.
    BlowUp
        The closed form escapes inside ``[0, T]`` (label ``"3.2a"``).
    """
    _require_scalar(spec)
    if coeffs is None:
        coeffs = scalar_coefficients(spec)
    At, M, N = (float(np.asarray(c).ravel()[0]) for c in coeffs[:3])
    a, b, _, _ = _dre_flags(At, M, N)
    if not (a or b):
        raise ConditionFailed("scalar DRE conditions both fail", assumption="3.2a")
    s_star = dre_escape_s(At, M, N)
    if s_star <= spec.T:
        raise BlowUp(
            f"scalar reduced DRE escapes at t={spec.T - s_star:.6g}",
            t_escape=spec.T - s_star, assumption="3.2a",
        )
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > spec.T):
        raise ValueError(f"t must lie in [0, {spec.T}]")
    return scalar_dre_closed_form(At, M, N, spec.T - t)


def scalar_layer_oracle(S: float, Delta2: float, Phi0: float, q0: float, p0: float, tau):
    """Closed-form scalar boundary layer ``(P12hat, P22hat)`` at ``tau``.

    ``p' = 2S p + Delta2 p^2`` is a Bernoulli equation; with ``p`` known the
    ``q`` equation ``q' = q (S + Delta2 p) + Phi0 p`` is linear and its
    integrating factor is ``exp(-S tau) p / p0``. Requires ``S < 0``.
    """
    tau = np.asarray(tau, dtype=float)
    if p0 == 0.0:
        return q0 * np.exp(S * tau), np.zeros_like(tau)
    # w = 1/p = (1/p0 + c) e^{-2S tau} - c with c = Delta2 / (2S).
    c = Delta2 / (2.0 * S)
    e1 = np.exp(S * tau)
    den = (1.0 / p0 + c) - c * e1 * e1
    p = e1 * e1 / den
    q = (q0 / p0) * e1 / den + Phi0 * (p - e1 / den) / S
    return q, p
