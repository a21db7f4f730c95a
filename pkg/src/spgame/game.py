"""Closed-loop simulation, Monte Carlo objectives and game values.

Both players use linear state feedback ``u_i = F_i1(t) x1 + F_i2(t) x2``.
Every running cost and deviation functional is a quadratic form in the
state, so a feedback law is turned into per-step closed-loop matrices and
quadratic-form weights before the path kernel runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import feedback_gains_approx, feedback_gains_exact
from .errors import KindMismatch, PathBlowUp, StepTooLarge
from .integrate import ToleranceConfig
from .kernels import simulate_paths
from .model import GameSpec, assemble_compact
from .reduced import ReducedSolution, solve_reduced
from .riccati import RiccatiSolution, solve_full

PATH_BLOWUP = 1e9
STEP_RATIO = 10.0
SADDLE_RHOS = (0.1, 0.5, 1.0)
SADDLE_STEP_RATIO = 100.0


def _split_x0(x0, spec: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x0, (tuple, list)) and len(x0) == 2 and np.ndim(x0[0]) == 1:
        x1, x2 = (np.asarray(v, dtype=float) for v in x0)
    else:
        flat = np.asarray(x0, dtype=float).ravel()
        if flat.size != spec.n:
            raise ValueError(f"x0 must have {spec.n} entries, got {flat.size}")
        x1, x2 = flat[: spec.n1], flat[spec.n1:]
    if x1.shape != (spec.n1,) or x2.shape != (spec.n2,):
        raise ValueError("x0 blocks do not match (n1, n2)")
    return x1, x2


# -- feedback laws ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeedbackLaw:
    """Time-varying linear feedback for both players.

    ``gains(t)`` returns ``(F11, F12, F21, F22)`` stacked along a leading
    axis that follows ``t``; queries are clamped to ``[0, T]``.
    ``offset1``/``offset2`` are constant ``k_i x n`` additions acting on the
    full state (used for saddle-point perturbations).
    """

    kind: str
    T: float
    _eval: Callable
    offset1: np.ndarray | None = None
    offset2: np.ndarray | None = None

    def gains(self, t):
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, self.T)
        return self._eval(t)

    def matrix(self, t) -> np.ndarray:
        """Stacked ``(k1 + k2) x n`` gain ``G(t)`` with offsets applied."""
        F11, F12, F21, F22 = self.gains(t)
        G1 = np.concatenate([F11, F12], axis=-1)
        G2 = np.concatenate([F21, F22], axis=-1)
        if self.offset1 is not None:
            G1 = G1 + self.offset1
        if self.offset2 is not None:
            G2 = G2 + self.offset2
        return np.concatenate([G1, G2], axis=-2)

    def perturbed(self, player: int, K) -> "FeedbackLaw":
        """Same law with the constant matrix ``K`` added to one player's gain."""
        K = np.atleast_2d(np.asarray(K, dtype=float))
        if player == 1:
            return FeedbackLaw(self.kind, self.T, self._eval, K, self.offset2)
        if player == 2:
            return FeedbackLaw(self.kind, self.T, self._eval, self.offset1, K)
        raise ValueError("player must be 1 or 2")


def make_feedback(kind: str, sol, spec: GameSpec) -> FeedbackLaw:
    """Exact gains from a :class:`RiccatiSolution` or approximate gains from a
    :class:`ReducedSolution`.

    Raises
    ------
    KindMismatch
        ``kind`` and the solution type disagree.
    """
    if kind == "exact":
        if not isinstance(sol, RiccatiSolution):
            raise KindMismatch("exact feedback needs a RiccatiSolution")
        eps = sol.eps

        def ev(t):
            P11, P12, P22 = sol.dense_eval(t)
            end = t >= sol.T
            P11[end] = 0.0
            P12[end] = 0.0
            P22[end] = 0.0
            return feedback_gains_exact(P11, P12, P22, eps, spec)

        return FeedbackLaw("exact", sol.T, ev)
    if kind == "approximate":
        if not isinstance(sol, ReducedSolution):
            raise KindMismatch("approximate feedback needs a ReducedSolution")

        def ev(t):
            P11b, P12b = sol.dense_eval(t)
            return feedback_gains_approx(P11b, P12b, sol.P22bar, spec)

        return FeedbackLaw("approximate", sol.T, ev)
    if kind == "zero":
        k1, k2 = spec.dims[2], spec.dims[3]

        def ev(t):
            z = lambda a, b: np.zeros((len(t), a, b))
            return z(k1, spec.n1), z(k1, spec.n2), z(k2, spec.n1), z(k2, spec.n2)

        return FeedbackLaw("zero", spec.T, ev)
    raise KindMismatch(f"unknown feedback kind {kind!r}")


# -- simulation -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimBatch:
    """Result of one Monte Carlo batch.

    ``costs`` holds per-path objective values; ``extras`` per-path values of
    any additional quadratic functionals requested; ``second_moment`` is the
    sample mean of ``|X(t_j)|^2`` on the time grid.
    """

    eps: float
    h: float
    n_paths: int
    seed: int
    x0: tuple[np.ndarray, np.ndarray]
    costs: np.ndarray
    x_final: np.ndarray
    second_moment: np.ndarray
    extras: dict = field(default_factory=dict)
    path_offset: int = 0

    def summary(self) -> dict:
        mean, stderr = mc_objective(self)
        return {
            "mean": mean, "stderr": stderr, "n_paths": self.n_paths,
            "h": self.h, "seed": self.seed, "eps": self.eps,
        }


def time_grid(T: float, h: float) -> tuple[np.ndarray, float]:
    """Uniform grid with the largest step not above ``h`` that divides ``T``."""
    n = max(1, math.ceil(T / h - 1e-9))
    return np.linspace(0.0, T, n + 1), T / n


def simulate_game(
    spec: GameSpec,
    eps: float,
    law: FeedbackLaw,
    x0,
    h: float,
    n_paths: int,
    seed: int,
    extra_forms: dict | None = None,
    coupling_h: float | None = None,
    path_offset: int = 0,
    backend: str | None = None,
) -> SimBatch:
    """Euler-Maruyama on the closed-loop slow-fast system.

    The running cost ``0.5 (x'Qx - |u1|^2 + |u2|^2)`` and any ``extra_forms``
    (name -> callable ``t -> (len(t), n, n)`` weight, or constant ``n x n``)
    are integrated by the trapezoid rule. ``coupling_h`` builds each
    increment from fine draws at that step so runs at different ``h`` share
    one Brownian path.

    Raises
    ------
    StepTooLarge
        ``h > eps / 10``.
    PathBlowUp
        A path's state norm exceeded ``1e9``.
    """
    if not (0 < eps <= 1):
        raise ValueError("eps must lie in (0, 1]")
    if h > eps / STEP_RATIO * (1 + 1e-12):
        raise StepTooLarge(f"h={h:g} exceeds eps/10={eps / STEP_RATIO:g}", h=h, eps=eps)
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    x1, x2 = _split_x0(x0, spec)
    t, h_eff = time_grid(spec.T, h)
    sub = 1
    if coupling_h is not None:
        ratio = h_eff / coupling_h
        sub = int(round(ratio))
        if sub < 1 or abs(ratio - sub) > 1e-9 * ratio:
            raise ValueError("h must be an integer multiple of coupling_h")
    cs = assemble_compact(spec, eps)
    G = law.matrix(t)
    Acl = cs.Aeps + cs.Beps @ G
    W_cost = 0.5 * (cs.Q + np.swapaxes(G, -1, -2) @ cs.R @ G)
    names = list(extra_forms or {})
    weights = [W_cost]
    for name in names:
        form = extra_forms[name]
        W = form(t) if callable(form) else np.broadcast_to(np.asarray(form, dtype=float), W_cost.shape)
        weights.append(W)
    W = np.stack(weights, axis=1)
    paths = np.arange(path_offset, path_offset + n_paths, dtype=np.int64)
    x_init = np.concatenate([x1, x2])
    integrals, x_final, sum_sq, bad_path, bad_step = simulate_paths(
        Acl, W, cs.sigmaeps, x_init, h_eff, seed, paths, PATH_BLOWUP, sub, backend
    )
    if bad_path >= 0:
        raise PathBlowUp(
            f"path {int(paths[bad_path])} exceeded {PATH_BLOWUP:g} at t={bad_step * h_eff:.6g}",
            path=int(paths[bad_path]), t=float(bad_step * h_eff),
        )
    return SimBatch(
        eps=float(eps), h=float(h_eff), n_paths=int(n_paths), seed=int(seed),
        x0=(x1, x2), costs=integrals[:, 0].copy(), x_final=x_final,
        second_moment=sum_sq / n_paths,
        extras={name: integrals[:, i + 1].copy() for i, name in enumerate(names)},
        path_offset=int(path_offset),
    )


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    mean = float(np.mean(v))
    if v.size < 2:
        return mean, math.nan
    return mean, float(np.std(v, ddof=1) / math.sqrt(v.size))


def mc_objective(batch: SimBatch) -> tuple[float, float]:
    """Sample mean and standard error of the per-path objective."""
    return mean_stderr(batch.costs)


# -- values ---------------------------------------------------------------------

def _trace_form(P, sigma) -> np.ndarray:
    # tr(sigma' P sigma) along a leading time axis.
    return np.einsum("ia,tij,ja->t", sigma, P, sigma)


def _trapezoid(y, t) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def closed_form_value(full: RiccatiSolution, spec: GameSpec, x0) -> float:
    """Game value at ``(0, x0)`` from the full Riccati solution.

    ``0.5 [x1'P11 x1 + 2 eps x1'P12 x2 + eps x2'P22 x2](0)
    + 0.5 int tr(s1'P11 s1) + tr(s2'P22 s2) dt``, trapezoid on the solver grid.
    """
    x1, x2 = _split_x0(x0, spec)
    e = full.eps
    P11, P12, P22 = full.P11, full.P12, full.P22
    if full.grid[0] == 0.0:
        a, b, c = P11[0], P12[0], P22[0]
    else:
        a, b, c = (blk[0] for blk in full.dense_eval(0.0))
    quad = x1 @ a @ x1 + 2 * e * (x1 @ b @ x2) + e * (x2 @ c @ x2)
    noise = _trace_form(P11, spec.sigma1) + _trace_form(P22, spec.sigma2)
    return float(0.5 * quad + 0.5 * _trapezoid(noise, full.grid))


def limiting_value(red: ReducedSolution, spec: GameSpec, x0) -> float:
    """``0.5 x1'P11bar(0) x1 + 0.5 int tr(s1'P11bar s1) dt + (T/2) tr(s2'P22bar s2)``."""
    x1, _ = _split_x0(x0, spec)
    quad = x1 @ red.P11bar[0] @ x1
    slow = _trapezoid(_trace_form(red.P11bar, spec.sigma1), red.grid)
    fast = float(np.trace(spec.sigma2.T @ red.P22bar @ spec.sigma2))
    return float(0.5 * quad + 0.5 * slow + 0.5 * red.T * fast)


@dataclass(frozen=True)
class ValueReport:
    V_eps_closed: float
    J_mc: float
    J_mc_stderr: float
    V_bar: float
    gap_exact_approx: float
    gap_to_limit: float
    gap_exact_approx_stderr: float = math.nan
    eps: float = math.nan
    h: float = math.nan
    n_paths: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def default_step(eps: float) -> float:
    return eps / STEP_RATIO


def value_report(
    spec: GameSpec,
    eps: float,
    x0,
    n_paths: int,
    seed: int,
    h: float | None = None,
    tol: ToleranceConfig = ToleranceConfig(),
    full: RiccatiSolution | None = None,
    red: ReducedSolution | None = None,
    backend: str | None = None,
) -> ValueReport:
    """Closed-form and Monte Carlo values plus the two asymptotic gaps."""
    full = full if full is not None else solve_full(spec, eps, tol)
    red = red if red is not None else solve_reduced(spec, tol)
    h = default_step(eps) if h is None else h
    exact = simulate_game(spec, eps, make_feedback("exact", full, spec), x0, h, n_paths, seed,
                          backend=backend)
    approx = simulate_game(spec, eps, make_feedback("approximate", red, spec), x0, h, n_paths,
                           seed, backend=backend)
    J, se = mc_objective(exact)
    gap, gap_se = mean_stderr(exact.costs - approx.costs)
    v_eps = closed_form_value(full, spec, x0)
    v_bar = limiting_value(red, spec, x0)
    return ValueReport(
        V_eps_closed=v_eps, J_mc=J, J_mc_stderr=se, V_bar=v_bar,
        gap_exact_approx=gap, gap_to_limit=v_eps - v_bar, gap_exact_approx_stderr=gap_se,
        eps=float(eps), h=exact.h, n_paths=int(n_paths), seed=int(seed),
    )


# -- saddle point and approximate strategies ---------------------------------------

@dataclass
class SaddleReport:
    """Outcome of the sampled saddle-point test.

    Each record holds ``player``, ``rho``, the paired gap ``J(perturbed) -
    J(saddle)`` with its standard error, the completion-of-squares estimate
    on the same paths, and whether the gap violates the inequality by more
    than three standard errors.
    """

    base_value: float
    base_stderr: float
    records: list[dict]

    @property
    def violations(self) -> int:
        return sum(r["violation"] for r in self.records)

    @property
    def square_mismatches(self) -> int:
        return sum(not r["square_match"] for r in self.records)

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value, "base_stderr": self.base_stderr,
            "violations": self.violations, "square_mismatches": self.square_mismatches,
            "records": self.records,
        }


def _random_direction(rng: np.random.Generator, shape, rho: float) -> np.ndarray:
    K = rng.standard_normal(shape)
    return rho * K / np.linalg.norm(K)


def saddle_check(
    spec: GameSpec,
    eps: float,
    full: RiccatiSolution,
    x0,
    n_perturbations: int = 20,
    n_paths: int = 2000,
    seed: int = 0,
    rhos=SADDLE_RHOS,
    h: float | None = None,
    backend: str | None = None,
) -> SaddleReport:
    """Test ``J(u1, u2hat) <= J(u1hat, u2hat) <= J(u1hat, u2)`` on sampled deviations.

    Each deviation adds a random constant matrix of Frobenius norm ``rho``
    to one player's exact gain. All three objectives use the same Brownian
    paths. The per-path completion-of-squares term ``0.5 int |K X|^2 dt``
    is integrated alongside, and the gap is compared with it
    (``+`` for player 2, ``-`` for player 1).

    That identity holds in continuous time only; its Euler-Maruyama defect
    is O(h), so the default step is ``eps/100`` rather than ``eps/10``.
    """
    h = eps / SADDLE_STEP_RATIO if h is None else h
    base_law = make_feedback("exact", full, spec)
    base = simulate_game(spec, eps, base_law, x0, h, n_paths, seed, backend=backend)
    base_mean, base_se = mc_objective(base)
    rng = np.random.default_rng(seed)
    k = {1: spec.dims[2], 2: spec.dims[3]}
    records = []
    for rho in rhos:
        for player in (1, 2):
            for i in range(n_perturbations):
                K = _random_direction(rng, (k[player], spec.n), rho)
                law = base_law.perturbed(player, K)
                sim = simulate_game(
                    spec, eps, law, x0, h, n_paths, seed,
                    extra_forms={"square": 0.5 * K.T @ K}, backend=backend,
                )
                diff = sim.costs - base.costs
                gap, gap_se = mean_stderr(diff)
                sign = 1.0 if player == 2 else -1.0
                square = sign * sim.extras["square"]
                sq_mean, _ = mean_stderr(square)
                resid, resid_se = mean_stderr(diff - square)
                violation = gap < -3 * gap_se if player == 2 else gap > 3 * gap_se
                records.append({
                    "player": player, "rho": float(rho), "index": i,
                    "gap": gap, "gap_stderr": gap_se,
                    "square": sq_mean, "residual": resid, "residual_stderr": resid_se,
                    "violation": bool(violation),
                    "square_match": bool(abs(resid) <= 3 * resid_se + 1e-14),
                })
    return SaddleReport(base_value=base_mean, base_stderr=base_se, records=records)


def approx_gap_stats(
    spec: GameSpec,
    eps: float,
    full: RiccatiSolution,
    red: ReducedSolution,
    x0,
    n_paths: int,
    seed: int,
    h: float | None = None,
    backend: str | None = None,
) -> tuple[float, float]:
    """``J(exact) - J(approximate)`` on common paths, with its paired standard error."""
    h = default_step(eps) if h is None else h
    a = simulate_game(spec, eps, make_feedback("exact", full, spec), x0, h, n_paths, seed,
                      backend=backend)
    b = simulate_game(spec, eps, make_feedback("approximate", red, spec), x0, h, n_paths, seed,
                      backend=backend)
    return mean_stderr(a.costs - b.costs)


def approx_gap(spec, eps, full, red, x0, n_paths, seed, h=None, backend=None) -> float:
    """Signed Monte Carlo gap between the exact and approximate saddle strategies."""
    return approx_gap_stats(spec, eps, full, red, x0, n_paths, seed, h, backend)[0]


def moment_probe(
    spec: GameSpec,
    red: ReducedSolution,
    eps_list,
    x0,
    n_paths: int,
    seed: int,
    backend: str | None = None,
) -> dict:
    """``max_t E|X(t)|^2`` under the approximate law for each ``eps``."""
    law = make_feedback("approximate", red, spec)
    out = {}
    for eps in eps_list:
        sim = simulate_game(spec, eps, law, x0, default_step(eps), n_paths, seed, backend=backend)
        out[float(eps)] = float(sim.second_moment.max())
    return out
