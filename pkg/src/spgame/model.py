"""Problem data for the slow-fast zero-sum LQ game.

The game is described by block matrices acting on a slow state ``x1``
(dimension ``n1``) and a fast state ``x2`` (dimension ``n2``). Player 1
(control dimension ``k1``) maximises and player 2 (``k2``) minimises the
quadratic running cost ``0.5 * (x1'Q1x1 + x2'Q2x2 - |u1|^2 + |u2|^2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import SpecError

MATRIX_NAMES = (
    "A11", "A12", "A21", "A22",
    "B11", "B12", "B21", "B22",
    "sigma1", "sigma2", "Q1", "Q2",
)
DIM_NAMES = ("n1", "n2", "k1", "k2", "m1", "m2")

SYMMETRY_RTOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=2, copy=True)
    arr.setflags(write=False)
    return arr


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def asymmetry(a: np.ndarray) -> float:
    """Relative Frobenius asymmetry ``|a - a'| / max(|a|, 1)``."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return math.inf
    return float(np.linalg.norm(a - a.T) / max(np.linalg.norm(a), 1.0))


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Block data of the game. Arrays are stored read-only.

    The plain constructor only coerces and freezes the arrays; use
    :func:`make_spec` (or :func:`load_spec`) for a checked, symmetrised spec.
    """

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    B11: np.ndarray
    B12: np.ndarray
    B21: np.ndarray
    B22: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    T: float
    declared_dims: tuple | None = field(default=None)

    def __post_init__(self):
        for name in MATRIX_NAMES:
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "T", float(self.T))
        if self.declared_dims is not None:
            object.__setattr__(self, "declared_dims", tuple(int(d) for d in self.declared_dims))

    @property
    def dims(self) -> tuple[int, int, int, int, int, int]:
        """``(n1, n2, k1, k2, m1, m2)`` read off the matrix shapes."""
        return (
            self.A11.shape[0], self.A22.shape[0],
            self.B11.shape[1], self.B12.shape[1],
            self.sigma1.shape[1], self.sigma2.shape[1],
        )

    @property
    def n1(self) -> int:
        return self.dims[0]

    @property
    def n2(self) -> int:
        return self.dims[1]

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def replace(self, **changes) -> "GameSpec":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        if any(k in changes for k in MATRIX_NAMES):
            kw["declared_dims"] = None
        return GameSpec(**kw)

    def to_dict(self) -> dict:
        out = dict(zip(DIM_NAMES, self.dims))
        out["T"] = self.T
        for name in MATRIX_NAMES:
            out[name] = getattr(self, name).tolist()
        return out


@dataclass(frozen=True)
class DeltaBlocks:
    Delta1: np.ndarray
    Delta: np.ndarray
    Delta2: np.ndarray


@dataclass(frozen=True)
class CompactSystem:
    Aeps: np.ndarray
    Beps: np.ndarray
    sigmaeps: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    eps: float


def _expected_shapes(dims):
    n1, n2, k1, k2, m1, m2 = dims
    return {
        "A11": (n1, n1), "A12": (n1, n2), "A21": (n2, n1), "A22": (n2, n2),
        "B11": (n1, k1), "B12": (n1, k2), "B21": (n2, k1), "B22": (n2, k2),
        "sigma1": (n1, m1), "sigma2": (n2, m2), "Q1": (n1, n1), "Q2": (n2, n2),
    }


def validate_spec(spec: GameSpec) -> list[str]:
    """Return every violated invariant; an empty list means well-formed."""
    problems = []
    if not (math.isfinite(spec.T) and spec.T > 0):
        problems.append("T must be positive")
    dims = spec.dims
    if spec.declared_dims is not None and tuple(spec.declared_dims) != dims:
        problems.append(f"declared dims {tuple(spec.declared_dims)} do not match matrix shapes {dims}")
    if any(d < 1 for d in dims):
        problems.append("all dimensions must be >= 1")
    for name, shape in _expected_shapes(dims).items():
        arr = getattr(spec, name)
        if arr.shape != shape:
            problems.append(f"{name} has shape {arr.shape}, expected {shape}")
        elif not np.all(np.isfinite(arr)):
            problems.append(f"{name} has non-finite entries")
    for name in ("Q1", "Q2"):
        if asymmetry(getattr(spec, name)) > SYMMETRY_RTOL:
            problems.append(f"{name} not symmetric")
    return problems


def make_spec(**blocks) -> GameSpec:
    """Checked constructor: validates and exactly symmetrises Q1, Q2."""
    spec = GameSpec(**blocks)
    problems = validate_spec(spec)
    if problems:
        raise SpecError("; ".join(problems), violations=problems)
    return spec.replace(Q1=sym(spec.Q1), Q2=sym(spec.Q2))


def require_valid(spec: GameSpec) -> None:
    problems = validate_spec(spec)
    if problems:
        raise SpecError("; ".join(problems), violations=problems)


def delta_blocks(spec: GameSpec) -> DeltaBlocks:
    D1 = spec.B11 @ spec.B11.T - spec.B12 @ spec.B12.T
    D = spec.B11 @ spec.B21.T - spec.B12 @ spec.B22.T
    D2 = spec.B21 @ spec.B21.T - spec.B22 @ spec.B22.T
    return DeltaBlocks(sym(D1), D, sym(D2))


def assemble_compact(spec: GameSpec, eps: float) -> CompactSystem:
    """Stack the blocks into the full-state system at perturbation ``eps``."""
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps!r}")
    n1, n2, k1, k2, m1, m2 = spec.dims
    Aeps = np.block([[spec.A11, spec.A12], [spec.A21 / eps, spec.A22 / eps]])
    Beps = np.block([[spec.B11, spec.B12], [spec.B21 / eps, spec.B22 / eps]])
    sigmaeps = np.block([
        [spec.sigma1, np.zeros((n1, m2))],
        [np.zeros((n2, m1)), spec.sigma2 / math.sqrt(eps)],
    ])
    Q = np.block([[spec.Q1, np.zeros((n1, n2))], [np.zeros((n2, n1)), spec.Q2]])
    R = np.diag(np.concatenate([-np.ones(k1), np.ones(k2)]))
    return CompactSystem(Aeps, Beps, sigmaeps, Q, R, float(eps))


# -- JSON interchange -------------------------------------------------------

def spec_from_dict(data: dict) -> GameSpec:
    missing = [k for k in DIM_NAMES + ("T",) + MATRIX_NAMES if k not in data]
    if missing:
        raise SpecError(f"missing keys: {', '.join(missing)}", violations=missing)
    blocks = {}
    for name in MATRIX_NAMES:
        try:
            arr = np.array(data[name], dtype=float, ndmin=2)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"{name}: not a numeric array-of-rows ({exc})") from None
        if arr.ndim != 2:
            raise SpecError(f"{name}: expected a 2-D array of rows")
        if not np.all(np.isfinite(arr)):
            raise SpecError(f"{name}: NaN/Inf entries are not allowed")
        blocks[name] = arr
    T = float(data["T"])
    if not math.isfinite(T):
        raise SpecError("T: NaN/Inf is not allowed")
    dims = tuple(int(data[k]) for k in DIM_NAMES)
    return make_spec(T=T, declared_dims=dims, **blocks)


def load_spec(path: str | Path) -> GameSpec:
    text = Path(path).read_text()
    # json accepts NaN/Infinity literals by default; refuse them
    def _reject(token):
        raise SpecError(f"non-finite literal {token!r} in spec file")

    return spec_from_dict(json.loads(text, parse_constant=_reject))


def dump_spec(spec: GameSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def scalar_spec(**values) -> GameSpec:
    """Convenience constructor for the all-dimensions-one case."""
    return make_spec(**{k: [[float(v)]] if k != "T" else float(v) for k, v in values.items()})


def fixture_s1(**overrides) -> GameSpec:
    """The canonical scalar test game used across the test-suite and CLI docs."""
    values = dict(
        A11=-1.0, A12=1.0, A21=0.5, A22=-1.0,
        B11=1.0, B12=0.5, B21=0.0, B22=1.0,
        sigma1=1.0, sigma2=1.0, Q1=1.0, Q2=1.0, T=2.0,
    )
    values.update(overrides)
    return scalar_spec(**values)
