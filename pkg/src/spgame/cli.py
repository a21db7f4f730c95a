"""Command-line front end.

Subcommands
-----------
solve     full, reduced and boundary-layer solutions at one ``eps`` plus an
          assumption certificate
sweep     error table over a list of ``eps`` values and fitted slopes
simulate  Monte Carlo value report at one ``eps``
report    all of the above, summarised as text

Errors raised by the library are printed as one JSON object on stdout
(also written to ``<out>/error.json``) and the process exits with status 1.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .asymptotics import DEFAULT_SWEEP, SWEEP_COLUMNS, sweep
from .boundary import default_tau_max, select_delta, solve_boundary_layer
from .errors import SpGameError
from .game import default_step, value_report
from .integrate import ToleranceConfig
from .model import delta_blocks, load_spec
from .reduced import solve_reduced, verify_reduced_system
from .riccati import riccati_residual, solve_full

EXIT_OK = 0
EXIT_ERROR = 1
REPORT_EPS = 0.1


@dataclass
class RunConfig:
    command: str
    spec_path: Path
    eps: float | None
    eps_list: list[float]
    tol: ToleranceConfig
    delta: float | None
    n_paths: int
    h: float | None
    seed: int
    x0: list[float] | None
    output_dir: Path
    backend: str | None = None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not (0 <= v < 2 ** 64):
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, type=Path, help="JSON game specification")
    common.add_argument("--eps", type=float, help="singular perturbation parameter in (0, 1]")
    common.add_argument("--eps-list", type=_float_list, help="comma-separated eps values")
    common.add_argument("--tol-rel", type=float, default=ToleranceConfig.rel)
    common.add_argument("--tol-abs", type=float, default=ToleranceConfig.abs)
    common.add_argument("--delta", type=float, help="boundary-layer slack in (0, gamma)")
    common.add_argument("--paths", type=int, default=10_000, help="Monte Carlo paths")
    common.add_argument("--step", type=float, help="Euler-Maruyama step (default eps/10)")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--x0", type=_float_list, help="initial state x1,x2 (comma-separated)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--backend", choices=("numba", "numpy"), help="kernel backend")
    parser = argparse.ArgumentParser(prog="spgame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("solve", "solve the full, reduced and boundary-layer systems"),
        ("sweep", "eps sweep with convergence-rate fits"),
        ("simulate", "Monte Carlo value report"),
        ("report", "run everything and print a summary"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command, spec_path=ns.spec, eps=ns.eps,
        eps_list=list(ns.eps_list) if ns.eps_list else list(DEFAULT_SWEEP),
        tol=ToleranceConfig(rel=ns.tol_rel, abs=ns.tol_abs), delta=ns.delta,
        n_paths=ns.paths, h=ns.step, seed=ns.seed, x0=ns.x0, output_dir=ns.out,
        backend=ns.backend,
    )


def _require_eps(cfg: RunConfig) -> float:
    if cfg.eps is None:
        raise ValueError(f"{cfg.command} needs --eps")
    if not (0 < cfg.eps <= 1):
        raise ValueError("--eps must lie in (0, 1]")
    return cfg.eps


def _x0(cfg: RunConfig, n: int) -> np.ndarray:
    if cfg.x0 is None:
        return np.ones(n)
    if len(cfg.x0) != n:
        raise ValueError(f"--x0 needs {n} values, got {len(cfg.x0)}")
    return np.asarray(cfg.x0, dtype=float)


def run_solve(cfg: RunConfig, spec) -> dict:
    eps = _require_eps(cfg)
    out = cfg.output_dir
    d = delta_blocks(spec)
    red = solve_reduced(spec, cfg.tol)
    delta = select_delta(spec, red.P22bar, cfg.delta)
    bl = solve_boundary_layer(
        spec, red, delta, default_tau_max(eps, spec.T, red.gamma, delta), cfg.tol
    )
    full = solve_full(spec, eps, cfg.tol)
    res = verify_reduced_system(red, spec)
    ops = np.linalg.norm(red.P22bar)
    certificate = {
        "eps": eps,
        "assumptions": {
            "3.1": {"pass": True,
                    "sigma_min_Delta2": float(np.linalg.svd(d.Delta2, compute_uv=False).min())},
            "3.2a": {"pass": True, "p0": red.p0},
            "3.2b": {"pass": True,
                     "max_real_eig_S": float(np.linalg.eigvals(red.S).real.max())},
            "4.1": {"pass": True, "gamma": red.gamma},
            "4.2": {"pass": True, "delta": bl.delta, "q2": bl.q2, "norm_P22bar": float(ops)},
        },
        "layer": bl.certificate(),
        "reduced_residuals": {"6a": res[0], "6b": res[1], "6c": res[2]},
        "full": {"riccati_residual": riccati_residual(full, spec), "n_grid": len(full.grid),
                 "P22_at_0": full.P22[0].tolist()},
    }
    io.write_csv(out / "full.csv", *io.riccati_table(full))
    io.write_csv(out / "reduced.csv", *io.reduced_table(red))
    io.write_json(out / "reduced.json", red.constants())
    io.write_csv(out / "boundary.csv", *io.boundary_table(bl))
    io.write_json(out / "certificate.json", certificate)
    return certificate


def run_sweep(cfg: RunConfig, spec) -> dict:
    x0 = _x0(cfg, spec.n) if cfg.x0 is not None else None
    res = sweep(spec, cfg.eps_list, cfg.tol, cfg.delta, x0=x0)
    cols = list(SWEEP_COLUMNS) + (["V_eps", "V_bar", "value_gap"] if x0 is not None else [])
    io.write_csv(cfg.output_dir / "sweep.csv", cols, [[r[c] for c in cols] for r in res.rows])
    summary = {"eps_list": [r["eps"] for r in res.rows], "slopes": res.slopes}
    io.write_json(cfg.output_dir / "slopes.json", summary)
    return summary


def run_simulate(cfg: RunConfig, spec) -> dict:
    eps = _require_eps(cfg)
    h = cfg.h if cfg.h is not None else default_step(eps)
    rep = value_report(spec, eps, _x0(cfg, spec.n), cfg.n_paths, cfg.seed, h, cfg.tol,
                       backend=cfg.backend)
    out = rep.to_dict()
    io.write_json(cfg.output_dir / "value.json", out)
    return out


def _summary_text(cert: dict, sweep_summary: dict, value: dict) -> str:
    lines = ["assumption certificate"]
    for key, item in cert["assumptions"].items():
        extra = ", ".join(f"{k}={v:.6g}" for k, v in item.items() if isinstance(v, float))
        lines.append(f"  {key}: {'pass' if item['pass'] else 'FAIL'}  {extra}")
    lay = cert["layer"]
    lines.append(f"  layer envelope violations: P12 {lay['violations_P12']}, "
                 f"P22 {lay['violations_P22']}")
    lines.append("")
    lines.append("convergence slopes (log-log)")
    for name, fit in sweep_summary["slopes"].items():
        lines.append(f"  {name:<14s} slope {fit['slope']:7.4f}  r^2 {fit['r_squared']:.4f}")
    lines.append("")
    lines.append(f"values at eps={value['eps']:g} (h={value['h']:.3g}, {value['n_paths']} paths)")
    lines.append(f"  V_eps closed form    {value['V_eps_closed']:.8g}")
    lines.append(f"  J Monte Carlo        {value['J_mc']:.8g} +/- {value['J_mc_stderr']:.2g}")
    lines.append(f"  V_bar limit          {value['V_bar']:.8g}")
    lines.append(f"  J(exact) - J(approx) {value['gap_exact_approx']:.4g} "
                 f"+/- {value['gap_exact_approx_stderr']:.2g}")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> int:
    """Execute one configuration; returns the process exit status."""
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        spec = load_spec(cfg.spec_path)
        if cfg.command == "solve":
            result = run_solve(cfg, spec)
        elif cfg.command == "sweep":
            result = run_sweep(cfg, spec)
        elif cfg.command == "simulate":
            result = run_simulate(cfg, spec)
        elif cfg.command == "report":
            if cfg.eps is None:
                cfg.eps = REPORT_EPS
            cert = run_solve(cfg, spec)
            summ = run_sweep(cfg, spec)
            value = run_simulate(cfg, spec)
            text = _summary_text(cert, summ, value)
            (out / "report.txt").write_text(text)
            sys.stdout.write(text)
            return EXIT_OK
        else:  # pragma: no cover - argparse restricts the choices
            raise ValueError(f"unknown command {cfg.command!r}")
    except (SpGameError, ValueError, OSError) as exc:
        payload = exc.to_dict() if isinstance(exc, SpGameError) else {
            "error": type(exc).__name__, "message": str(exc)}
        text = io.dumps_json(payload)
        sys.stdout.write(text)
        try:
            (out / "error.json").write_text(text)
        except OSError:
            pass
        return EXIT_ERROR
    sys.stdout.write(io.dumps_json(result))
    return EXIT_OK


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return run(config_from_args(ns))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
