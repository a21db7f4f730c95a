"""Wall-clock comparison of the numba and pure-numpy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is warmed up
once per backend (numba compilation is excluded) and then timed as the best
of ``--repeat`` runs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spgame import assemble_compact, fixture_s1, make_feedback, simulate_game, solve_full
from spgame._accel import HAVE_NUMBA
from spgame.kernels import rk4_riccati
from spgame.rng import gaussian_block


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(paths: int):
    spec = fixture_s1()
    eps = 0.1
    law = make_feedback("exact", solve_full(spec, eps), spec)
    c = assemble_compact(spec, 1.0)
    D = -c.Beps @ np.linalg.inv(c.R) @ c.Beps.T
    x0 = np.array([1.0, 1.0])
    return {
        "gaussian_block": lambda b: gaussian_block(1, np.arange(paths), 0, 2, backend=b),
        "simulate_game": lambda b: simulate_game(spec, eps, law, x0, 1e-2, paths, 1, backend=b),
        "rk4_riccati": lambda b: rk4_riccati(c.Aeps, D, c.Q, spec.T, 20_000, 100, backend=b),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.paths).items():
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        speedup = t["numpy"] / t["numba"] if "numba" in t else float("nan")
        print(f"{name:<16}" + "".join(f"{t[b]:>11.4f}s" for b in backends) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
