"""Command-line front end: ``fpt solve | verify | simulate | compare | oracle``.

Exit codes: 0 success, 1 input or validation error, 2 the run finished but
failed its check (residual above threshold, solver did not converge).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .boundary import Boundary, certify_growth, load_boundary
from .closed_forms import closed_form_for
from .errors import ConvergenceError, FptError, QuadratureError
from .fileio import (
    RunManifest,
    atomic_write_text,
    read_density_csv,
    write_crossings_csv,
    write_density_csv,
    write_json,
)
from .grids import CollocationGrid, DensityGrid, TailModel, graded_nodes
from .kernel import QUAD_TOL, residual
from .mc import McConfig, simulate
from .solver import SolverConfig, build_system, load_config, solve

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2
DEFAULT_C_GRID = "1,2,4,8,12"


class InputError(Exception):
    """Bad command-line input; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for failed checks
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_c_grid(text: str, boundary: Boundary) -> CollocationGrid:
    """``"1,2,4,8"`` (explicit values) or ``"geom:c_min:c_max:count"``."""
    text = text.strip()
    try:
        if text.startswith("geom:"):
            parts = text.split(":")[1:]
            if len(parts) != 3:
                raise InputError(f"expected geom:c_min:c_max:count, got {text!r}")
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            return CollocationGrid.geometric(lo, hi, count, boundary)
        values = sorted(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"cannot parse c-grid {text!r}: {exc}") from exc
    return CollocationGrid.from_values(values, boundary)


def _read_json(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def _boundary(path) -> Boundary:
    try:
        return load_boundary(path)
    except OSError as exc:
        raise InputError(f"cannot read boundary file: {exc}") from exc


def _solver_config(args) -> SolverConfig:
    cfg = load_config(args.config) if args.config else SolverConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.threshold is not None:
        changes["threshold"] = args.threshold
    return cfg.replace(**changes) if changes else cfg


def _mc_config(path, seed) -> McConfig:
    data = _read_json(path)
    if seed is not None:
        data["seed"] = seed
    return McConfig.from_dict(data)


def _certified(boundary: Boundary, horizon: float):
    cert = certify_growth(boundary, horizon)
    if not cert.passed:
        raise InputError(
            f"boundary fails its {cert.violated} certificate at t={cert.first_violation:.6g}"
        )


def _run_solve(boundary, cfg, out_dir):
    _certified(boundary, cfg.T)
    density, diag = solve(build_system(boundary, cfg))
    out_dir.mkdir(parents=True, exist_ok=True)
    report = diag.residual_report
    passed = report.max_residual <= cfg.threshold
    paths = [
        write_density_csv(out_dir / "density.csv", density),
        write_json(out_dir / "diagnostics.json", {
            **diag.to_dict(),
            "threshold": cfg.threshold,
            "passed": passed,
            "tail": None if density.tail is None else density.tail.to_dict(),
        }),
        write_json(out_dir / "residuals.json", report.to_dict()),
    ]
    return density, diag, passed, paths


def cmd_solve(args) -> int:
    start = time.perf_counter()
    boundary = _boundary(args.boundary)
    cfg = _solver_config(args)
    out = Path(args.out)
    density, diag, passed, paths = _run_solve(boundary, cfg, out)
    manifest = RunManifest("solve", {"solver": cfg.to_dict(), "boundary": boundary.to_dict()})
    manifest.add_input(args.boundary)
    manifest.add_input(args.config)
    for p in paths:
        manifest.add_output(p)
    manifest.wall_clock = time.perf_counter() - start
    manifest.write(out)
    r = diag.residual_report
    print(f"max residual {r.max_residual:.3e} (threshold {cfg.threshold:.1e}), "
          f"alpha {diag.alpha_used:.3e}, mass on [0,T] {diag.total_mass:.6f}, "
          f"tail mass {diag.tail_mass:.6f}")
    if not passed:
        print("residual above threshold", file=sys.stderr)
    return EXIT_OK if passed else EXIT_CHECK


def cmd_verify(args) -> int:
    boundary = _boundary(args.boundary)
    density = read_density_csv(args.density)
    if not args.no_tail:
        tail = TailModel(density.T, float(density.f_values[-1]), boundary.growth_d, boundary.b0)
        density = DensityGrid.from_values(density.s_nodes, density.f_values, tail=tail,
                                          F_values=density.F_values)
    grid = parse_c_grid(args.c_grid, boundary)
    report = residual(boundary, density, grid, quad_tol=args.quad_tol)
    threshold = 1e-4 if args.threshold is None else args.threshold
    text = report.to_json()
    print(text)
    if args.out:
        write_json(args.out, report.to_dict())
    return EXIT_OK if report.max_residual <= threshold else EXIT_CHECK


def _run_simulate(boundary, mc, out_dir):
    emp = simulate(boundary, mc)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        write_crossings_csv(out_dir / "crossings.csv", emp.crossing_times),
        write_json(out_dir / "summary.json", emp.summary()),
    ]
    return emp, paths


def cmd_simulate(args) -> int:
    start = time.perf_counter()
    boundary = _boundary(args.boundary)
    mc = _mc_config(args.config, args.seed)
    out = Path(args.out)
    emp, paths = _run_simulate(boundary, mc, out)
    manifest = RunManifest("simulate", {"mc": mc.to_dict(), "boundary": boundary.to_dict()})
    manifest.add_input(args.boundary)
    manifest.add_input(args.config)
    for p in paths:
        manifest.add_output(p)
    manifest.wall_clock = time.perf_counter() - start
    manifest.write(out)
    s = emp.summary()
    print(f"{s['n_crossed']} of {s['n_paths']} paths crossed by t={mc.horizon:g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    start = time.perf_counter()
    boundary = _boundary(args.boundary)
    cfg = _solver_config(args)
    mc = _mc_config(args.mc_config, args.seed)
    out = Path(args.out)
    density, diag, passed, paths = _run_solve(boundary, cfg, out)
    emp, mc_paths = _run_simulate(boundary, mc, out)
    paths += mc_paths

    t = np.linspace(0.0, min(cfg.T, mc.horizon), args.points)
    F_solver = density.cdf(t)
    F_mc = emp.cdf(t)
    gap = np.abs(F_solver - F_mc)
    table = "t,F_solver,F_mc,abs_diff\n" + "".join(
        f"{a!r},{b!r},{c!r},{d!r}\n" for a, b, c, d in
        zip(t.tolist(), F_solver.tolist(), F_mc.tolist(), gap.tolist())
    )
    paths.append(atomic_write_text(out / "compare.csv", table))
    sup = float(gap.max())
    paths.append(write_json(out / "compare.json", {
        "sup_distance": sup,
        "points": args.points,
        "t_max": float(t[-1]),
        "solver_max_residual": diag.residual_report.max_residual,
        "solver_passed": passed,
        "mc_paths": mc.n_paths,
    }))
    manifest = RunManifest("compare", {
        "solver": cfg.to_dict(), "mc": mc.to_dict(), "boundary": boundary.to_dict(),
    })
    manifest.add_input(args.boundary)
    manifest.add_input(args.config)
    manifest.add_input(args.mc_config)
    for p in paths:
        manifest.add_output(p)
    manifest.wall_clock = time.perf_counter() - start
    manifest.write(out)
    print(f"sup |F_solver - F_mc| on [0, {t[-1]:g}] = {sup:.4e}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    boundary = _boundary(args.boundary)
    exact = closed_form_for(boundary)
    s = graded_nodes(args.T, args.N)
    density = DensityGrid.from_values(s, exact.density(s), F_values=exact.cdf(s))
    write_density_csv(args.out, density)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fpt", description="First passage time densities from the first-kind equation."
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="recover the density for a boundary")
    p.add_argument("--boundary", required=True)
    p.add_argument("--config", help="solver config JSON (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, help="acceptance threshold on the max residual")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="residual report of a density CSV")
    p.add_argument("--boundary", required=True)
    p.add_argument("--density", required=True, help="CSV with columns s,f[,F]")
    p.add_argument("--c-grid", default=DEFAULT_C_GRID,
                   help="'1,2,4' or 'geom:c_min:c_max:count' (default %(default)s)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--quad-tol", type=float, default=QUAD_TOL)
    p.add_argument("--no-tail", action="store_true",
                   help="treat the density as 0 beyond the last node instead of "
                        "continuing it with the solver's tail model")
    p.add_argument("--out", help="also write the report to this JSON file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo crossing times")
    p.add_argument("--boundary", required=True)
    p.add_argument("--config", help="Monte Carlo config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="solver CDF against Monte Carlo")
    p.add_argument("--boundary", required=True)
    p.add_argument("--config", help="solver config JSON")
    p.add_argument("--mc-config", help="Monte Carlo config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--points", type=int, default=201, help="size of the common t-grid")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="closed-form density CSV (constant/linear boundaries)")
    p.add_argument("--boundary", required=True)
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--N", type=int, default=200)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConvergenceError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (InputError, FptError, OSError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
