"""Adaptive Dormand-Prince 5(4) integration with PI step control.

All Riccati flows in this package are integrated *forward* in a running
variable ``s`` (``s = T - t`` for the backward-in-time equations, ``s = tau``
for the boundary layer). The integrator keeps every accepted step and
returns a C1 piecewise-cubic Hermite trajectory built from the state and
the right-hand side at the step ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BlowUp, StepLimitExceeded

# Dormand & Prince (1980) coefficients.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A = [np.array(row) for row in _A]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04  # PI feedback on the previous error
_ALPHA = 0.2 - 0.75 * _BETA


@dataclass(frozen=True)
class ToleranceConfig:
    rel: float = 1e-8
    abs: float = 1e-10
    max_steps: int = 2_000_000
    blowup: float = 1e12

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError("tolerances must be positive")


class HermiteTrajectory:
    """Piecewise cubic Hermite interpolant over accepted steps."""

    def __init__(self, s: np.ndarray, y: np.ndarray, dy: np.ndarray):
        self.s = np.asarray(s, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.dy = np.asarray(dy, dtype=float)

    def _locate(self, q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        lo, hi = self.s[0], self.s[-1]
        if np.any(q < lo - 1e-12 * max(1.0, abs(hi))) or np.any(q > hi + 1e-12 * max(1.0, abs(hi))):
            raise ValueError("query outside the integrated range")
        q = np.clip(q, lo, hi)
        idx = np.clip(np.searchsorted(self.s, q, side="right") - 1, 0, len(self.s) - 2)
        h = self.s[idx + 1] - self.s[idx]
        theta = (q - self.s[idx]) / h
        return idx, h[:, None], theta[:, None]

    def __call__(self, q) -> np.ndarray:
        idx, h, th = self._locate(q)
        y0, y1 = self.y[idx], self.y[idx + 1]
        f0, f1 = self.dy[idx], self.dy[idx + 1]
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th * th * (3 - 2 * th)
        h11 = th * th * (th - 1)
        return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1

    def derivative(self, q) -> np.ndarray:
        idx, h, th = self._locate(q)
        y0, y1 = self.y[idx], self.y[idx + 1]
        f0, f1 = self.dy[idx], self.dy[idx + 1]
        d00 = 6 * th * (th - 1) / h
        d10 = (1 - th) * (1 - 3 * th)
        d01 = -d00
        d11 = th * (3 * th - 2)
        return d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1


def _initial_step(rhs, s0, y0, f0, span, tol, order=5):
    scale = tol.abs + tol.rel * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = rhs(s0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1, span)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    s_end: float,
    tol: ToleranceConfig = ToleranceConfig(),
    step_cap: Callable[[float], float] | None = None,
    post_step: Callable[[np.ndarray], tuple[np.ndarray, bool]] | None = None,
) -> HermiteTrajectory:
    """Integrate ``dy/ds = rhs(s, y)`` from ``s = 0`` to ``s_end``.

    ``step_cap(s)`` bounds the step taken from ``s``. ``post_step`` may
    project an accepted state (e.g. symmetrise) and veto the step by
    returning ``False``; vetoed steps are retried with half the size.

    Raises :class:`BlowUp` (with ``t_escape`` holding the ``s`` value) when
    the state norm exceeds ``tol.blowup`` and :class:`StepLimitExceeded`
    when the step size underflows ``1e-14 * s_end`` or the step budget is
    exhausted.
    """
    y = np.array(y0, dtype=float)
    s = 0.0
    span = float(s_end)
    if span <= 0:
        raise ValueError("s_end must be positive")
    h_min = 1e-14 * span
    f = rhs(s, y)
    ss, ys, fs = [s], [y.copy()], [f.copy()]
    h = _initial_step(rhs, s, y, f, span, tol)
    err_prev = 1e-4
    k = np.empty((7, y.size))
    n_steps = 0
    rejected_last = False
    while s < span:
        if n_steps >= tol.max_steps:
            raise StepLimitExceeded(f"step budget {tol.max_steps} exhausted at s={s:.6g}", s=s)
        cap = step_cap(s) if step_cap is not None else np.inf
        h = min(h, cap, span - s)
        if span - s - h < h_min:
            h = span - s
        if h < h_min and span - s > h_min:
            # steps collapsing on a huge state mean a pole, not stiffness
            if np.linalg.norm(y) > np.sqrt(tol.blowup):
                raise BlowUp(f"step collapse at state norm {np.linalg.norm(y):.3g}", t_escape=s)
            raise StepLimitExceeded(f"step size underflow at s={s:.6g}", s=s)
        n_steps += 1
        k[0] = f
        for i in range(1, 7):
            yi = y + h * (_A[i] @ k[:i])
            k[i] = rhs(s + _C[i] * h, yi)
        y_new = y + h * (_B5[:6] @ k[:6])
        f_new = k[6].copy()
        err_vec = h * (_E @ k)
        scale = tol.abs + tol.rel * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not np.isfinite(err):
            if not np.all(np.isfinite(y_new)) and np.linalg.norm(y) > 1e6:
                raise BlowUp("state became non-finite", t_escape=s)
            h *= 0.25
            rejected_last = True
            continue
        if err <= 1.0:
            ok = True
            projected = False
            if post_step is not None:
                y_proj, ok = post_step(y_new)
                projected = ok and not np.array_equal(y_proj, y_new)
                y_new = y_proj
            if not ok:
                h *= 0.5
                rejected_last = True
                continue
            s = span if span - (s + h) < h_min else s + h
            y = y_new
            f = f_new
            if projected:
                f = rhs(s, y)
            ss.append(s)
            ys.append(y.copy())
            fs.append(f.copy())
            if np.linalg.norm(y) > tol.blowup:
                raise BlowUp(f"state norm exceeded {tol.blowup:g}", t_escape=s)
            fac = _SAFETY * max(err, 1e-10) ** (-_ALPHA) * err_prev ** _BETA
            fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            h *= fac
            err_prev = max(err, 1e-4)
            rejected_last = False
        else:
            fac = max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))
            h *= fac
            rejected_last = True
    return HermiteTrajectory(np.array(ss), np.array(ys), np.array(fs))
