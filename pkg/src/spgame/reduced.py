"""Reduced (eps = 0) differential-algebraic Riccati pair.

Setting ``eps = 0`` in the full system leaves an algebraic Riccati equation
for the fast block,

    A22'P22 + P22 A22 + P22 Delta2 P22 + Q2 = 0,

whose stabilising root makes ``S = A22 + Delta2 P22`` Hurwitz, and a
differential Riccati equation for the slow block,

    dP11/dt + At'P11 + P11 At + P11 M P11 + N = 0,   P11(T) = 0,

with coefficients ``At, M, N`` built from ``Lambda = A22'Delta2^{-1}A22 - Q2``.
The off-diagonal block is then an affine function of ``P11``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import BlowUp, Delta2Singular, LambdaSingular, NoStabilizingSolution
from .integrate import HermiteTrajectory, ToleranceConfig, integrate
from .model import GameSpec, delta_blocks, require_valid, sym
from .riccati import full_rhs

IMAG_AXIS_TOL = 1e-10
SINGULAR_RTOL = 1e-10
COEFF_SYM_DRIFT = 1e-12


def _check_delta2(Delta2: np.ndarray) -> None:
    norm = np.linalg.norm(Delta2)
    smin = np.linalg.svd(Delta2, compute_uv=False).min()
    if norm == 0.0 or smin < SINGULAR_RTOL * norm:
        raise Delta2Singular(
            f"Delta2 is singular (sigma_min={smin:.3g}, |Delta2|={norm:.3g})",
            sigma_min=float(smin),
        )


def are_residual(P22: np.ndarray, spec: GameSpec) -> np.ndarray:
    D2 = delta_blocks(spec).Delta2
    return spec.A22.T @ P22 + P22 @ spec.A22 + P22 @ D2 @ P22 + spec.Q2


def _newton_step(P22: np.ndarray, spec: GameSpec, Delta2: np.ndarray) -> np.ndarray:
    # Linearising the ARE at P gives S'dP + dP S = -R(P) with S = A22 + Delta2 P.
    S = spec.A22 + Delta2 @ P22
    R = are_residual(P22, spec)
    dP = sla.solve_continuous_lyapunov(S.T, -R)
    return sym(P22 + sym(dP))


def solve_reduced_are(spec: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    """Stabilising root of the fast algebraic Riccati equation.

    The stable invariant subspace of the Hamiltonian ``[[A22, Delta2],
    [-Q2, -A22']]`` is extracted by an ordered real Schur form; with basis
    ``[X; Y]`` the root is ``Y X^{-1}``, polished by one Newton step.

    Returns
    -------
    P22bar, S
        The symmetric root and the closed-loop matrix ``A22 + Delta2 P22bar``.

    Raises
    ------
    Delta2Singular
        ``Delta2`` is numerically singular.
    NoStabilizingSolution
        Eigenvalues on the imaginary axis, or a singular ``X`` block.
    """
    require_valid(spec)
    D2 = delta_blocks(spec).Delta2
    _check_delta2(D2)
    n2 = spec.n2
    H = np.block([[spec.A22, D2], [-spec.Q2, -spec.A22.T]])
    eig = np.linalg.eigvals(H)
    if np.any(np.abs(eig.real) < IMAG_AXIS_TOL):
        raise NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis")
    _, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n2:
        raise NoStabilizingSolution(f"stable subspace has dimension {sdim}, expected {n2}")
    X, Y = Z[:n2, :n2], Z[n2:, :n2]
    if np.linalg.svd(X, compute_uv=False).min() < SINGULAR_RTOL * max(1.0, np.linalg.norm(X)):
        raise NoStabilizingSolution("stable subspace basis has a singular upper block")
    P22 = sym(np.linalg.solve(X.T, Y.T).T)
    P22 = _newton_step(P22, spec, D2)
    S = spec.A22 + D2 @ P22
    if np.max(np.linalg.eigvals(S).real) >= 0.0:
        raise NoStabilizingSolution("closed-loop fast matrix is not Hurwitz")
    return P22, S


def newton_are(spec: GameSpec, P0, max_iter: int = 50, tol: float = 1e-14) -> np.ndarray:
    """Newton-Kleinman iteration on the fast ARE from an initial guess ``P0``.

    Converges to the stabilising root when ``A22 + Delta2 P0`` is Hurwitz.
    """
    D2 = delta_blocks(spec).Delta2
    _check_delta2(D2)
    P = sym(np.atleast_2d(np.asarray(P0, dtype=float)))
    for _ in range(max_iter):
        P_new = _newton_step(P, spec, D2)
        step = np.linalg.norm(P_new - P)
        P = P_new
        if step <= tol * max(1.0, np.linalg.norm(P)):
            break
    return P


def reduced_coefficients(spec: GameSpec, P22bar=None):
    """Coefficients ``(Atilde, M, N, Lambda)`` of the slow reduced Riccati equation.

    ``P22bar`` is accepted for interface symmetry; the formulas depend only
    on the problem data.

    Raises
    ------
    Delta2Singular, LambdaSingular
    """
    d = delta_blocks(spec)
    _check_delta2(d.Delta2)
    A11, A12, A21, A22 = spec.A11, spec.A12, spec.A21, spec.A22
    D2inv = np.linalg.inv(d.Delta2)
    Lam = sym(A22.T @ D2inv @ A22 - spec.Q2)
    lnorm = np.linalg.norm(Lam)
    smin = np.linalg.svd(Lam, compute_uv=False).min()
    if lnorm == 0.0 or smin < SINGULAR_RTOL * lnorm:
        raise LambdaSingular(f"Lambda is singular (sigma_min={smin:.3g})", sigma_min=float(smin))
    Linv = np.linalg.inv(Lam)
    # Shared bracket Delta2^{-1} [Delta2 - A22 Lambda^{-1} A22'] Delta2^{-1}.
    K = D2inv @ (d.Delta2 - A22 @ Linv @ A22.T) @ D2inv
    DD = d.Delta @ D2inv
    Atilde = A11 - d.Delta @ K @ A21 - A12 @ Linv @ A22.T @ D2inv @ A21
    M = (
        d.Delta1 + A12 @ Linv @ A12.T - DD @ A22 @ Linv @ A12.T
        - A12 @ Linv @ A22.T @ DD.T - d.Delta @ K @ d.Delta.T
    )
    N = spec.Q1 - A21.T @ K @ A21
    for name, mat in (("M", M), ("N", N)):
        drift = np.linalg.norm(mat - mat.T)
        if drift > COEFF_SYM_DRIFT * max(1.0, np.linalg.norm(mat)):
            raise ArithmeticError(f"{name} symmetry drift {drift:.3g}")
    return Atilde, sym(M), sym(N), Lam


def p12_bar(P11bar_at_t, P22bar, spec: GameSpec) -> np.ndarray:
    """Off-diagonal reduced block ``-(A21'P22 + P11 A12 + P11 Delta P22) S^{-1}``."""
    d = delta_blocks(spec)
    P11 = np.asarray(P11bar_at_t, dtype=float)
    if P11.ndim < 2:
        P11 = np.atleast_2d(P11)
    Sinv = np.linalg.inv(spec.A22 + d.Delta2 @ P22bar)
    # Leading axes of P11 (a stack of time points) broadcast through.
    num = spec.A21.T @ P22bar + P11 @ (spec.A12 + d.Delta @ P22bar)
    return -num @ Sinv


@dataclass(frozen=True, eq=False)
class ReducedSolution:
    """Reduced triple ``(P11bar(t), P12bar(t), P22bar)`` with its coefficients.

    Trajectories live on ``grid`` (increasing in ``t``); ``dense_eval``
    interpolates ``P11bar`` and maps it through :func:`p12_bar`.
    """

    T: float
    grid: np.ndarray
    P11bar: np.ndarray
    P12bar: np.ndarray
    P22bar: np.ndarray
    Atilde: np.ndarray
    M: np.ndarray
    N: np.ndarray
    Lambda: np.ndarray
    S: np.ndarray
    gamma: float
    p0: float
    _traj: HermiteTrajectory
    _spec: GameSpec

    def dense_eval(self, t):
        """``(P11bar, P12bar)`` stacked along a leading axis that follows ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n1 = self.P11bar.shape[-1]
        P11 = self._traj(self.T - t).reshape(-1, n1, n1)
        return P11, p12_bar(P11, self.P22bar, self._spec)

    def dense_derivative(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n1 = self.P11bar.shape[-1]
        return -self._traj.derivative(self.T - t).reshape(-1, n1, n1)

    def constants(self) -> dict:
        return {
            "P22bar": self.P22bar.tolist(),
            "S": self.S.tolist(),
            "Atilde": self.Atilde.tolist(),
            "M": self.M.tolist(),
            "N": self.N.tolist(),
            "Lambda": self.Lambda.tolist(),
            "gamma": self.gamma,
            "p0": self.p0,
        }


def solve_reduced_dre(spec: GameSpec, coeffs, tol: ToleranceConfig = ToleranceConfig()):
    """Integrate the slow reduced Riccati equation backward from ``P11bar(T) = 0``.

    Returns ``(grid, P11bar, trajectory)`` with ``grid`` increasing in ``t``.

    Raises
    ------
    BlowUp
        Finite escape on ``[0, T]``; tagged with assumption ``"3.2a"``.
    """
    Atilde, M, N, _ = coeffs
    n1 = Atilde.shape[0]
    AtT = Atilde.T

    def rhs(s, y):
        P = y.reshape(n1, n1)
        return sym(AtT @ P + P @ Atilde + P @ M @ P + N).ravel()

    def symmetrize(y):
        P = y.reshape(n1, n1)
        return sym(P).ravel(), True

    try:
        traj = integrate(rhs, np.zeros(n1 * n1), spec.T, tol, post_step=symmetrize)
    except BlowUp as exc:
        raise BlowUp(
            f"reduced slow Riccati equation escapes at t~{spec.T - exc.t_escape:.6g}",
            t_escape=spec.T - exc.t_escape,
            assumption="3.2a",
        ) from None
    grid = (spec.T - traj.s)[::-1].copy()
    grid[0] = 0.0
    P11 = traj.y[::-1].reshape(-1, n1, n1).copy()
    return grid, P11, traj


def solve_reduced(spec: GameSpec, tol: ToleranceConfig = ToleranceConfig()) -> ReducedSolution:
    """Full reduced pipeline: ARE root, coefficients, slow DRE, off-diagonal block."""
    P22, S = solve_reduced_are(spec)
    coeffs = reduced_coefficients(spec, P22)
    grid, P11, traj = solve_reduced_dre(spec, coeffs, tol)
    P12 = p12_bar(P11, P22, spec)
    gamma = float(-np.linalg.eigvalsh(sym(S)).max())
    p0 = float(np.max(np.linalg.norm(P11, axis=(-2, -1))))
    Atilde, M, N, Lam = coeffs
    return ReducedSolution(
        T=spec.T, grid=grid, P11bar=P11, P12bar=P12, P22bar=P22,
        Atilde=Atilde, M=M, N=N, Lambda=Lam, S=S, gamma=gamma, p0=p0,
        _traj=traj, _spec=spec,
    )


def verify_reduced_system(
    rs: ReducedSolution, spec: GameSpec, include_midpoints: bool = False
) -> tuple[float, float, float]:
    """Max Frobenius residuals of the three eps = 0 equations.

    By default the residuals are taken on the integrator knots, where the
    Hermite derivative equals the right-hand side; ``include_midpoints``
    adds the step midpoints, where the interpolant is weakest.
    """
    t = rs.grid
    if include_midpoints:
        t = np.union1d(t, 0.5 * (rs.grid[1:] + rs.grid[:-1]))
    P11, P12 = rs.dense_eval(t)
    dP11 = rs.dense_derivative(t)
    res_a = res_b = res_c = 0.0
    for k in range(len(t)):
        f, g1, g2 = full_rhs(P11[k], P12[k], rs.P22bar, 0.0, spec)
        res_a = max(res_a, float(np.linalg.norm(dP11[k] + f)))
        res_b = max(res_b, float(np.linalg.norm(g1)))
        res_c = max(res_c, float(np.linalg.norm(g2)))
    return res_a, res_b, res_c
