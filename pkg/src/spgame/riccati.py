"""Full singularly perturbed Riccati system at a fixed ``eps``.

The generalised Riccati solution is kept in first-order form

    P = [[P11, eps*P12], [eps*P12', eps*P22]]

and the three blocks are integrated backward from ``P(T) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrate import HermiteTrajectory, ToleranceConfig, integrate
from .errors import BlowUp
from .model import GameSpec, assemble_compact, delta_blocks, require_valid, sym

SYMMETRY_DRIFT_MAX = 1e-9
LAYER_DECADES = 50.0


class _Blocks:
    """Spec matrices and Delta blocks bundled for the inner RHS loop."""

    def __init__(self, spec: GameSpec):
        d = delta_blocks(spec)
        self.n1, self.n2 = spec.n1, spec.n2
        self.A11, self.A12, self.A21, self.A22 = spec.A11, spec.A12, spec.A21, spec.A22
        self.A11T, self.A12T, self.A21T, self.A22T = spec.A11.T, spec.A12.T, spec.A21.T, spec.A22.T
        self.Q1, self.Q2 = spec.Q1, spec.Q2
        self.D1, self.D, self.D2 = d.Delta1, d.Delta, d.Delta2
        self.DT = d.Delta.T

    def rhs(self, P11, P12, P22, eps):
        P12T = P12.T
        P11D = P11 @ self.D
        f = (
            self.A11T @ P11 + self.A21T @ P12T + P11 @ self.A11 + P12 @ self.A21
            + P11 @ self.D1 @ P11 + P12 @ self.DT @ P11 + P11D @ P12T
            + P12 @ self.D2 @ P12T + self.Q1
        )
        g1 = (
            self.A21T @ P22 + P11 @ self.A12 + P12 @ self.A22
            + P11D @ P22 + P12 @ self.D2 @ P22
        )
        g2 = self.A22T @ P22 + P22 @ self.A22 + P22 @ self.D2 @ P22 + self.Q2
        if eps != 0.0:
            g1 = g1 + eps * (self.A11T @ P12 + P11 @ self.D1 @ P12 + P12 @ self.DT @ P12)
            g2 = g2 + eps * (
                self.A12T @ P12 + P12T @ self.A12 + P12T @ self.D @ P22 + P22 @ self.DT @ P12
            ) + eps * eps * (P12T @ self.D1 @ P12)
        return sym(f), g1, sym(g2)

    def pack(self, P11, P12, P22):
        return np.concatenate([P11.ravel(), P12.ravel(), P22.ravel()])

    def unpack(self, y):
        n1, n2 = self.n1, self.n2
        a, b = n1 * n1, n1 * n1 + n1 * n2
        y = np.asarray(y)
        lead = y.shape[:-1]
        return (
            y[..., :a].reshape(lead + (n1, n1)),
            y[..., a:b].reshape(lead + (n1, n2)),
            y[..., b:].reshape(lead + (n2, n2)),
        )


def full_rhs(P11, P12, P22, eps: float, spec: GameSpec):
    """Return ``(f, g1, g2)``; ``eps = 0`` gives the reduced-system right-hand sides."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return _Blocks(spec).rhs(np.atleast_2d(P11), np.atleast_2d(P12), np.atleast_2d(P22), float(eps))


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Trajectories of the full system on ``[0, T]``.

    ``grid`` is increasing in ``t``; ``P11``, ``P12``, ``P22`` hold the block
    values on it. ``knots`` are the accepted integrator steps (also in ``t``)
    backing the Hermite dense output.
    """

    eps: float
    T: float
    grid: np.ndarray
    P11: np.ndarray
    P12: np.ndarray
    P22: np.ndarray
    knots: np.ndarray
    _traj: HermiteTrajectory
    _blocks: _Blocks

    def dense_eval(self, t):
        """Block values at arbitrary ``t`` in ``[0, T]``; leading axis follows ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        _check_range(t, self.T)
        return self._blocks.unpack(self._traj(self.T - t))

    def dense_derivative(self, t):
        """Time derivatives ``d/dt`` of the three blocks from the interpolant."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        _check_range(t, self.T)
        return self._blocks.unpack(-self._traj.derivative(self.T - t))

    def step_midpoints(self) -> np.ndarray:
        return 0.5 * (self.knots[1:] + self.knots[:-1])


def _check_range(t, T):
    if np.any(t < -1e-12 * T) or np.any(t > T * (1 + 1e-12)):
        raise ValueError(f"t must lie in [0, {T}]")


def solve_full(
    spec: GameSpec,
    eps: float,
    tol: ToleranceConfig = ToleranceConfig(),
    output_grid=None,
) -> RiccatiSolution:
    """Integrate the full system backward from the zero terminal condition.

    For ``eps < 1e-2`` the terminal layer ``[T - 50*eps*ln(10), T]`` is
    stepped with a cap of ``eps/20`` before the controller is released.

    Raises
    ------
    BlowUp
        The generalised Riccati equation escapes in finite time; the
        ``t_escape`` attribute is the (approximate) escape time.
    StepLimitExceeded
        Step size underflow or the integrator budget ran out.
    """
    require_valid(spec)
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps!r}")
    blocks = _Blocks(spec)
    n1, n2 = blocks.n1, blocks.n2
    inv_eps = 1.0 / eps

    def rhs(s, y):
        P11, P12, P22 = blocks.unpack(y)
        f, g1, g2 = blocks.rhs(P11, P12, P22, eps)
        return np.concatenate([f.ravel(), inv_eps * g1.ravel(), inv_eps * g2.ravel()])

    def symmetrize(y):
        P11, P12, P22 = blocks.unpack(y)
        drift = max(np.linalg.norm(P11 - P11.T), np.linalg.norm(P22 - P22.T))
        if drift >= SYMMETRY_DRIFT_MAX:
            return y, False
        return blocks.pack(sym(P11), P12, sym(P22)), True

    step_cap = None
    if eps < 1e-2:
        layer = LAYER_DECADES * eps * math.log(10.0)
        cap = eps / 20.0

        def step_cap(s):
            return cap if s < layer else np.inf

    y0 = np.zeros(n1 * n1 + n1 * n2 + n2 * n2)
    try:
        traj = integrate(rhs, y0, spec.T, tol, step_cap=step_cap, post_step=symmetrize)
    except BlowUp as exc:
        raise BlowUp(
            f"full system escapes at t~{spec.T - exc.t_escape:.6g} (eps={eps:g})",
            t_escape=spec.T - exc.t_escape,
        ) from None
    knots = (spec.T - traj.s)[::-1].copy()
    knots[0] = 0.0
    if output_grid is None:
        grid = knots
        P11, P12, P22 = blocks.unpack(traj.y[::-1])
    else:
        grid = np.asarray(output_grid, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise ValueError("output_grid must be strictly increasing")
        _check_range(grid, spec.T)
        P11, P12, P22 = blocks.unpack(traj(spec.T - grid))
    return RiccatiSolution(
        eps=float(eps), T=spec.T, grid=grid,
        P11=np.ascontiguousarray(P11), P12=np.ascontiguousarray(P12), P22=np.ascontiguousarray(P22),
        knots=knots, _traj=traj, _blocks=blocks,
    )


def assemble_P(sol: RiccatiSolution, t: float) -> np.ndarray:
    """The ``n x n`` generalised Riccati solution at time ``t``."""
    if not (0.0 <= t <= sol.T):
        raise ValueError(f"t must lie in [0, {sol.T}]")
    P11, P12, P22 = (b[0] for b in sol.dense_eval(t))
    if t == sol.T:
        P11, P12, P22 = np.zeros_like(P11), np.zeros_like(P12), np.zeros_like(P22)
    e = sol.eps
    return np.block([[P11, e * P12], [e * P12.T, e * P22]])


def _assemble_many(P11, P12, P22, eps):
    top = np.concatenate([P11, eps * P12], axis=-1)
    bottom = np.concatenate([eps * np.swapaxes(P12, -1, -2), eps * P22], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def riccati_residual(sol: RiccatiSolution, spec: GameSpec, include_midpoints: bool = True) -> float:
    """Max Frobenius residual of the assembled ``n x n`` Riccati equation.

    The residual is built from the compact matrices (not from ``f, g1, g2``)
    with the time derivative taken from the Hermite interpolant. Step
    midpoints are included by default, where the interpolant is weakest.
    """
    cs = assemble_compact(spec, sol.eps)
    D = -cs.Beps @ np.linalg.solve(cs.R, cs.Beps.T)
    t = sol.grid
    if include_midpoints:
        t = np.union1d(t, sol.step_midpoints())
    P = _assemble_many(*sol.dense_eval(t), sol.eps)
    dP = _assemble_many(*sol.dense_derivative(t), sol.eps)
    At = cs.Aeps.T
    res = dP + At @ P + P @ cs.Aeps + P @ D @ P + cs.Q
    return float(np.max(np.linalg.norm(res, axis=(-2, -1))))
