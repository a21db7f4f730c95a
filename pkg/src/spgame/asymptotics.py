"""Error estimates between the full, reduced and boundary-layer solutions.

The composite approximation of the full solution is

    P11(t) ~ P11bar(t),
    P12(t) ~ P12bar(t) + P12hat((T - t)/eps),
    P22(t) ~ P22bar     + P22hat((T - t)/eps),

with errors expected to be first order in ``eps``. This module measures
those errors, the L2 distance between exact and approximate feedback
gains, and fits log-log rates across a sweep of ``eps`` values.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .boundary import BoundaryLayerSolution, default_tau_max, select_delta, solve_boundary_layer
from .errors import GridMismatch, InsufficientPoints
from .integrate import ToleranceConfig
from .model import GameSpec
from .reduced import ReducedSolution, solve_reduced
from .riccati import RiccatiSolution, solve_full

N_UNIFORM = 200
DEFAULT_SWEEP = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
GAP_NAMES = ("gap_11", "gap_12", "gap_21", "gap_22")


@dataclass(frozen=True)
class TikhonovReport:
    eps: float
    err_P11: float
    err_P12: float
    err_P22: float
    err_assembled: float
    l2_gaps: tuple[float, float, float, float]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["l2_gaps"] = list(self.l2_gaps)
        return out


@dataclass(frozen=True)
class RateFit:
    eps_values: list[float]
    errors: list[float]
    slope: float
    intercept: float
    r_squared: float
    excluded: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_spec(full: RiccatiSolution, red: ReducedSolution) -> None:
    if not math.isclose(full.T, red.T, rel_tol=0, abs_tol=1e-14 * max(1.0, full.T)):
        raise GridMismatch(f"horizons differ: full T={full.T}, reduced T={red.T}")


def sample_points(full: RiccatiSolution, mode: str = "merged") -> np.ndarray:
    """Time points for sup norms: solver grid, 200 uniform points, or their union."""
    uniform = np.linspace(0.0, full.T, N_UNIFORM)
    if mode == "grid":
        return full.grid.copy()
    if mode == "uniform":
        return uniform
    if mode == "merged":
        return np.union1d(full.grid, uniform)
    raise ValueError(f"unknown sampling mode {mode!r}")


def _fro(x) -> np.ndarray:
    return np.linalg.norm(x, axis=(-2, -1))


def _layer_at(bl: BoundaryLayerSolution, t, T: float, eps: float):
    tau = (T - np.asarray(t)) / eps
    if tau.max() > bl.tau_max * (1 + 1e-12):
        raise GridMismatch(
            f"boundary layer covers tau <= {bl.tau_max:.6g}, need {tau.max():.6g} (T/eps)"
        )
    return bl.dense_eval(np.minimum(tau, bl.tau_max))


def tikhonov_errors(
    full: RiccatiSolution,
    red: ReducedSolution,
    bl: BoundaryLayerSolution,
    spec: GameSpec,
    points: str = "merged",
) -> TikhonovReport:
    """Sup-norm errors of the composite approximation and the feedback L2 gaps.

    Sup norms are sampled on the solver grid united with 200 uniform
    points (``points`` selects another set for diagnostics).

    Raises
    ------
    GridMismatch
        Horizons differ or the layer does not reach ``tau = T/eps``.
    """
    _check_spec(full, red)
    t = sample_points(full, points)
    eps = full.eps
    P11, P12, P22 = full.dense_eval(t)
    P11b, P12b = red.dense_eval(t)
    P12h, P22h = _layer_at(bl, t, full.T, eps)
    terminal = t >= full.T
    # Enforce the exact terminal data where the grid reaches t = T.
    P11[terminal] = 0.0
    P12[terminal] = 0.0
    P22[terminal] = 0.0
    e11 = _fro(P11 - P11b)
    e12 = _fro(P12 - P12b - P12h)
    e22 = _fro(P22 - red.P22bar - P22h)
    assembled = np.sqrt(e11 ** 2 + 2 * _fro(eps * P12) ** 2 + _fro(eps * P22) ** 2)
    return TikhonovReport(
        eps=eps,
        err_P11=float(e11.max()),
        err_P12=float(e12.max()),
        err_P22=float(e22.max()),
        err_assembled=float(assembled.max()),
        l2_gaps=l2_feedback_gap(full, red, spec),
    )


def _merged_grid(full: RiccatiSolution, red: ReducedSolution) -> np.ndarray:
    return np.union1d(full.grid, red.grid)


def _trapezoid(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def feedback_gains_exact(P11, P12, P22, eps: float, spec: GameSpec):
    """Exact saddle-point gains, vectorised over a leading time axis."""
    P12T = np.swapaxes(P12, -1, -2)
    F11 = spec.B11.T @ P11 + spec.B21.T @ P12T
    F12 = eps * spec.B11.T @ P12 + spec.B21.T @ P22
    F21 = -(spec.B12.T @ P11 + spec.B22.T @ P12T)
    F22 = -(eps * spec.B12.T @ P12 + spec.B22.T @ P22)
    return F11, F12, F21, F22


def feedback_gains_approx(P11bar, P12bar, P22bar, spec: GameSpec):
    """Approximate gains from the reduced triple (no ``eps`` terms)."""
    return feedback_gains_exact(P11bar, P12bar, P22bar, 0.0, spec)


def l2_feedback_gap(full: RiccatiSolution, red: ReducedSolution, spec: GameSpec):
    """``int_0^T |F_ij(t) - Fbar_ij(t)|^2 dt`` for the four gain blocks."""
    _check_spec(full, red)
    t = _merged_grid(full, red)
    P11, P12, P22 = full.dense_eval(t)
    P11b, P12b = red.dense_eval(t)
    exact = feedback_gains_exact(P11, P12, P22, full.eps, spec)
    approx = feedback_gains_approx(P11b, P12b, red.P22bar, spec)
    return tuple(_trapezoid(_fro(F - G) ** 2, t) for F, G in zip(exact, approx))


def corollary44_integrals(full: RiccatiSolution, red: ReducedSolution, spec: GameSpec, j: int):
    """``int_0^T |P_i2(t) - Pbar_i2(t)|^j dt`` for ``i = 1, 2``."""
    if int(j) != j or j < 1:
        raise ValueError("j must be a positive integer")
    _check_spec(full, red)
    t = _merged_grid(full, red)
    _, P12, P22 = full.dense_eval(t)
    _, P12b = red.dense_eval(t)
    return (
        _trapezoid(_fro(P12 - P12b) ** j, t),
        _trapezoid(_fro(P22 - red.P22bar) ** j, t),
    )


def fit_rate(sweep) -> RateFit:
    """Least-squares line through ``(ln eps, ln err)``.

    Zero errors are excluded from the fit and listed in ``excluded``.

    Raises
    ------
    InsufficientPoints
        Fewer than three strictly positive errors.
    """
    pts = sorted(((float(e), float(v)) for e, v in sweep), key=lambda p: -p[0])
    if any(not (e > 0) for e, _ in pts):
        raise ValueError("eps values must be positive")
    if any(not math.isfinite(v) or v < 0 for _, v in pts):
        raise ValueError("errors must be finite and non-negative")
    used = [(e, v) for e, v in pts if v > 0]
    excluded = [e for e, v in pts if v == 0]
    if len(used) < 3:
        raise InsufficientPoints(f"need at least 3 positive points, got {len(used)}", n=len(used))
    x = np.log([e for e, _ in used])
    y = np.log([v for _, v in used])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        eps_values=[e for e, _ in used], errors=[v for _, v in used],
        slope=float(slope), intercept=float(intercept), r_squared=r2, excluded=excluded,
    )


@dataclass
class SweepResult:
    rows: list[dict]
    slopes: dict
    reduced: ReducedSolution
    layer: BoundaryLayerSolution

    def column(self, name: str) -> list[float]:
        return [row[name] for row in self.rows]


SWEEP_COLUMNS = (
    "eps", "err_P11", "err_P12", "err_P22", "err_assembled",
    *GAP_NAMES, "fastdev_12_j1", "fastdev_22_j1", "fastdev_12_j2", "fastdev_22_j2",
)


def sweep(
    spec: GameSpec,
    eps_list=DEFAULT_SWEEP,
    tol: ToleranceConfig = ToleranceConfig(),
    delta: float | None = None,
    x0=None,
) -> SweepResult:
    """Run the full/reduced/layer comparison for every ``eps`` and fit slopes.

    With ``x0`` given, each row also carries ``V_eps`` (closed-form value),
    ``V_bar`` (limiting value) and their absolute difference ``value_gap``.

    Raises
    ------
    InsufficientPoints
        Fewer than three ``eps`` values (the slope fits need three).
    """
    eps_list = sorted({float(e) for e in eps_list}, reverse=True)
    if len(eps_list) < 3:
        raise InsufficientPoints(f"a sweep needs at least 3 eps values, got {len(eps_list)}")
    if any(not (0 < e <= 1) for e in eps_list):
        raise ValueError("eps values must lie in (0, 1]")
    red = solve_reduced(spec, tol)
    delta = select_delta(spec, red.P22bar, delta)
    tau_max = default_tau_max(min(eps_list), spec.T, red.gamma, delta)
    bl = solve_boundary_layer(spec, red, delta, tau_max, tol)
    rows = []
    for eps in eps_list:
        full = solve_full(spec, eps, tol)
        rep = tikhonov_errors(full, red, bl, spec)
        row = {
            "eps": eps, "err_P11": rep.err_P11, "err_P12": rep.err_P12,
            "err_P22": rep.err_P22, "err_assembled": rep.err_assembled,
        }
        row.update(zip(GAP_NAMES, rep.l2_gaps))
        for j in (1, 2):
            c12, c22 = corollary44_integrals(full, red, spec, j)
            row[f"fastdev_12_j{j}"] = c12
            row[f"fastdev_22_j{j}"] = c22
        if x0 is not None:
            from .game import closed_form_value, limiting_value

            v_eps = closed_form_value(full, spec, x0)
            v_bar = limiting_value(red, spec, x0)
            row.update(V_eps=v_eps, V_bar=v_bar, value_gap=abs(v_eps - v_bar))
        rows.append(row)
    metrics = [c for c in SWEEP_COLUMNS if c != "eps"] + (["value_gap"] if x0 is not None else [])
    slopes = {}
    for name in metrics:
        fit = fit_rate([(r["eps"], r[name]) for r in rows])
        slopes[name] = fit.to_dict()
    return SweepResult(rows=rows, slopes=slopes, reduced=red, layer=bl)
