"""Boundary-layer system in stretched time ``tau = (T - t) / eps``.

Near the terminal time the fast blocks move on the ``1/eps`` scale. Their
deviations from the reduced solution obey

    dP12h/dtau = P12h S + Phi(0) P22h + P12h Delta2 P22h,
    dP22h/dtau = S'P22h + P22h S + P22h Delta2 P22h,

started from ``(-h(0), -P22bar)``. When ``sym(S)`` is negative definite with
margin ``gamma`` both deviations decay exponentially, with envelopes built
from ``gamma``, a slack ``delta`` in ``(0, gamma)`` and the radius ``q2`` of
a certified ball of attraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionFailed, BlowUp, EnvelopeViolated
from .integrate import HermiteTrajectory, ToleranceConfig, integrate
from .model import GameSpec, delta_blocks, sym
from .reduced import ReducedSolution, p12_bar

GAMMA_FLOOR = 1e-12
DELTA_MAX_FRACTION = 0.99
ENVELOPE_SLACK = 10.0


def h_map(P11, P22bar, spec: GameSpec) -> np.ndarray:
    """Slow manifold of the off-diagonal block; identical to :func:`p12_bar`."""
    return p12_bar(P11, P22bar, spec)


def phi_map(P11, spec: GameSpec, P22bar) -> np.ndarray:
    """``Phi(P11) = A21' + P11 Delta + h(P11) Delta2``."""
    d = delta_blocks(spec)
    P11 = np.atleast_2d(np.asarray(P11, dtype=float))
    return spec.A21.T + P11 @ d.Delta + h_map(P11, P22bar, spec) @ d.Delta2


def gamma_margin(spec: GameSpec, P22bar) -> float:
    """``gamma = -lambda_max(sym(S))`` with ``S = A22 + Delta2 P22bar``.

    Raises
    ------
    AssumptionFailed
        Label ``"4.1"`` when ``gamma <= 1e-12``.
    """
    S = spec.A22 + delta_blocks(spec).Delta2 @ P22bar
    gamma = float(-np.linalg.eigvalsh(sym(S)).max())
    if gamma <= GAMMA_FLOOR:
        raise AssumptionFailed(
            "4.1", f"sym(S) is not negative definite (gamma={gamma:.6g})", gamma=gamma
        )
    return gamma


def attraction_check(spec: GameSpec, P22bar, delta: float) -> tuple[bool, float]:
    """Certified radius ``q2 = (gamma + delta) / ||Delta2||_2`` and whether ``-P22bar`` lies inside.

    For ``|P|_F <= q2``, ``sym(S + Delta2 P)`` is bounded by
    ``-gamma + ||Delta2||_2 q2 = delta``, which is the region condition.
    """
    gamma = gamma_margin(spec, P22bar)
    if not (0.0 < delta < gamma):
        raise ValueError(f"delta must lie in (0, gamma={gamma:.6g}), got {delta!r}")
    op = float(np.linalg.norm(delta_blocks(spec).Delta2, 2))
    q2 = math.inf if op == 0.0 else (gamma + delta) / op
    return bool(np.linalg.norm(P22bar) < q2), q2


def select_delta(spec: GameSpec, P22bar, delta: float | None = None) -> float:
    """Pick ``delta``: the given value, else ``gamma/2`` raised by bisection if needed.

    The certified ball grows with ``delta``, so when ``gamma/2`` does not
    certify ``-P22bar`` the smallest passing value in ``[gamma/2, 0.99 gamma]``
    is located by bisection.

    Raises
    ------
    AssumptionFailed
        Label ``"4.2"`` when no admissible ``delta`` certifies the initial data.
    """
    gamma = gamma_margin(spec, P22bar)
    if delta is not None:
        ok, q2 = attraction_check(spec, P22bar, delta)
        if not ok:
            raise AssumptionFailed(
                "4.2", f"-P22bar outside the certified ball (q2={q2:.6g}) at delta={delta:.6g}",
                delta=delta, q2=q2,
            )
        return float(delta)
    lo, hi = 0.5 * gamma, DELTA_MAX_FRACTION * gamma
    if attraction_check(spec, P22bar, lo)[0]:
        return lo
    ok, q2 = attraction_check(spec, P22bar, hi)
    if not ok:
        raise AssumptionFailed(
            "4.2", f"-P22bar outside the certified ball for every delta up to {hi:.6g}",
            delta=hi, q2=q2,
        )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if attraction_check(spec, P22bar, mid)[0]:
            hi = mid
        else:
            lo = mid
    return hi


def default_tau_max(eps: float, T: float, gamma: float, delta: float) -> float:
    """``max(T/eps, 60/(gamma - delta))``."""
    if min(eps, T, gamma) <= 0 or not (0 < delta < gamma or math.isinf(gamma)):
        raise ValueError("positive inputs with 0 < delta < gamma required")
    return max(T / eps, 60.0 / (gamma - delta))


def layer_rhs(P12h, P22h, S, Phi0, Delta2):
    d12 = P12h @ S + Phi0 @ P22h + P12h @ Delta2 @ P22h
    d22 = S.T @ P22h + P22h @ S + P22h @ Delta2 @ P22h
    return d12, sym(d22)


@dataclass(frozen=True, eq=False)
class BoundaryLayerSolution:
    """Layer trajectories on ``tau_grid`` with the decay certificate."""

    tau_grid: np.ndarray
    P12hat: np.ndarray
    P22hat: np.ndarray
    gamma: float
    delta: float
    q2: float
    k1: float
    k2: float
    phi0_norm: float
    phi_sup: float
    _traj: HermiteTrajectory
    _shape: tuple[int, int]

    @property
    def tau_max(self) -> float:
        return float(self.tau_grid[-1])

    def dense_eval(self, tau):
        """``(P12hat, P22hat)`` at arbitrary ``tau`` in ``[0, tau_max]``."""
        n1, n2 = self._shape
        y = self._traj(np.atleast_1d(np.asarray(tau, dtype=float)))
        return y[:, : n1 * n2].reshape(-1, n1, n2), y[:, n1 * n2:].reshape(-1, n2, n2)

    def envelopes(self, tau=None):
        """Analytic bounds ``(env12, env22)`` at ``tau`` (default: the grid)."""
        tau = self.tau_grid if tau is None else np.asarray(tau, dtype=float)
        r12 = float(np.linalg.norm(self.P12hat[0]))
        r22 = float(np.linalg.norm(self.P22hat[0]))
        slow = np.exp(-(self.gamma - self.delta) * tau)
        env22 = slow * r22
        env12 = self.k1 * np.exp(-self.gamma * tau) * r12 + self.k2 * slow
        return env12, env22

    def envelope_violations(self) -> tuple[int, int]:
        """Grid points where a norm strictly exceeds its envelope (round-off aside)."""
        env12, env22 = self.envelopes()
        n12 = np.linalg.norm(self.P12hat, axis=(-2, -1))
        n22 = np.linalg.norm(self.P22hat, axis=(-2, -1))
        slack = 4 * np.finfo(float).eps
        return (
            int(np.sum(n12 > env12 * (1 + slack) + 1e-300)),
            int(np.sum(n22 > env22 * (1 + slack) + 1e-300)),
        )

    def certificate(self) -> dict:
        v12, v22 = self.envelope_violations()
        return {
            "gamma": self.gamma, "delta": self.delta, "q2": self.q2,
            "k1": self.k1, "k2": self.k2,
            "phi0_norm": self.phi0_norm, "phi_sup": self.phi_sup,
            "tau_max": self.tau_max,
            "violations_P12": v12, "violations_P22": v22,
        }


def solve_boundary_layer(
    spec: GameSpec,
    red: ReducedSolution,
    delta: float | None = None,
    tau_max: float | None = None,
    tol: ToleranceConfig = ToleranceConfig(),
) -> BoundaryLayerSolution:
    """Integrate the layer system forward in ``tau`` and certify its decay.

    ``delta`` defaults to :func:`select_delta`; ``tau_max`` defaults to
    ``60/(gamma - delta)``. Envelope constants are
    ``k1 = exp(|Delta2| q2 / (gamma - delta))`` and
    ``k2 = |Phi(0)| q2 / delta * k1``.

    Raises
    ------
    AssumptionFailed
        ``"4.1"`` or ``"4.2"``.
    EnvelopeViolated
        A norm exceeds its envelope by more than ten times the tolerance.
    """
    P22bar = red.P22bar
    d = delta_blocks(spec)
    gamma = gamma_margin(spec, P22bar)
    delta = select_delta(spec, P22bar, delta)
    _, q2 = attraction_check(spec, P22bar, delta)
    if tau_max is None:
        tau_max = 60.0 / (gamma - delta)
    if not tau_max > 0:
        raise ValueError("tau_max must be positive")
    n1, n2 = spec.n1, spec.n2
    zero = np.zeros((n1, n1))
    S = spec.A22 + d.Delta2 @ P22bar
    Phi0 = phi_map(zero, spec, P22bar)
    D2 = d.Delta2
    split = n1 * n2

    def rhs(_tau, y):
        a, b = layer_rhs(y[:split].reshape(n1, n2), y[split:].reshape(n2, n2), S, Phi0, D2)
        return np.concatenate([a.ravel(), b.ravel()])

    def symmetrize(y):
        P22h = y[split:].reshape(n2, n2)
        return np.concatenate([y[:split], sym(P22h).ravel()]), True

    y0 = np.concatenate([(-h_map(zero, P22bar, spec)).ravel(), (-P22bar).ravel()])
    # The layer decays through hundreds of decades; an absolute floor would
    # let round-off dominate the tail, so error control is relative only.
    layer_tol = ToleranceConfig(
        rel=tol.rel, abs=np.finfo(float).tiny, max_steps=tol.max_steps, blowup=tol.blowup
    )
    try:
        traj = integrate(rhs, y0, float(tau_max), layer_tol, post_step=symmetrize)
    except BlowUp as exc:  # pragma: no cover - excluded by the certificate
        raise AssumptionFailed("4.2", f"layer trajectory escaped at tau={exc.t_escape:.6g}") from None

    fro_D2 = float(np.linalg.norm(D2))
    k1 = math.exp(fro_D2 * q2 / (gamma - delta)) if math.isfinite(q2) else 1.0
    phi0_norm = float(np.linalg.norm(Phi0))
    k2 = phi0_norm * (q2 if math.isfinite(q2) else 0.0) / delta * k1
    phi_sup = float(np.max(np.linalg.norm(phi_map(red.P11bar, spec, P22bar), axis=(-2, -1))))
    sol = BoundaryLayerSolution(
        tau_grid=traj.s.copy(),
        P12hat=traj.y[:, :split].reshape(-1, n1, n2).copy(),
        P22hat=traj.y[:, split:].reshape(-1, n2, n2).copy(),
        gamma=gamma, delta=float(delta), q2=float(q2), k1=k1, k2=k2,
        phi0_norm=phi0_norm, phi_sup=phi_sup, _traj=traj, _shape=(n1, n2),
    )
    env12, env22 = sol.envelopes()
    n12 = np.linalg.norm(sol.P12hat, axis=(-2, -1))
    n22 = np.linalg.norm(sol.P22hat, axis=(-2, -1))
    for norms, env in ((n12, env12), (n22, env22)):
        excess = norms - env - ENVELOPE_SLACK * (tol.abs + tol.rel * env)
        if np.any(excess > 0):
            k = int(np.argmax(excess > 0))
            raise EnvelopeViolated(
                f"layer norm {norms[k]:.6g} exceeds envelope {env[k]:.6g}",
                tau=float(sol.tau_grid[k]),
            )
    return sol
