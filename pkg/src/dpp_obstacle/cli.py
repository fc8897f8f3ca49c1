"""Command-line front end: ``dpp-obstacle {solve,simulate,validate,bench}``.

Exit codes: 0 success, 2 configuration error, 3 convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, resolve_problem
from .dpp import coefficients, solve_bracket
from .errors import DppError, MaxIterationsExceeded
from .mesh import Mesh, build_mesh

log = logging.getLogger("dpp_obstacle")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4

SOLUTION_HEADER = ["x", "y", "class", "u", "psi1", "psi2"]
BENCH_HEADER = ["radius_units", "k", "runtime_s", "iterations", "error1", "error2"]
BENCH_P_HEADER = ["p", "no_obstacle", "one_obstacle", "two_obstacles"]


class OutputError(DppError, OSError):
    pass


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def solution_csv(mesh: Mesh, u, psi1, psi2) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SOLUTION_HEADER)
    for i in range(mesh.n_nodes):
        w.writerow([_fmt(mesh.nodes[i, 0]), _fmt(mesh.nodes[i, 1]),
                    "interior" if mesh.interior[i] else "collar",
                    _fmt(u[i]), _fmt(psi1[i]), _fmt(psi2[i])])
    return buf.getvalue()


def read_solution_csv(path) -> dict:
    """Columns of a solution.csv as numpy arrays (``class`` as strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {k: np.array([float(r[k]) for r in rows]) for k in ("x", "y", "u", "psi1", "psi2")}
    out["class"] = np.array([r["class"] for r in rows])
    return out


def emit_outputs(results: dict, config: RunConfig, out_dir=None) -> list[Path]:
    """Write the artifacts of a finished run; returns the written paths.

    ``results`` may hold ``solution`` (mesh, u, psi1, psi2), ``bench_rows``,
    ``p_sweep`` and ``report`` (JSON-serializable dict).
    """
    out = Path(out_dir if out_dir is not None else config.out)
    written = []
    if "solution" in results:
        mesh, u, psi1, psi2 = results["solution"]
        path = out / "solution.csv"
        _atomic_write(path, solution_csv(mesh, u, psi1, psi2))
        written.append(path)
    if "bench_rows" in results:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for r in results["bench_rows"]:
            w.writerow([r.radius_units, r.k, _fmt(r.runtime_s), _fmt(r.iterations), _fmt(r.error1), _fmt(r.error2)])
        path = out / "bench.csv"
        _atomic_write(path, buf.getvalue())
        written.append(path)
    if "p_sweep" in results:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BENCH_P_HEADER)
        for p, row in results["p_sweep"].items():
            w.writerow([_fmt(p)] + [_fmt(row[c]) for c in BENCH_P_HEADER[1:]])
        path = out / "bench_p.csv"
        _atomic_write(path, buf.getvalue())
        written.append(path)
    report = {"version": __version__, "command": config.command, "config": config.to_dict()}
    report.update(results.get("report", {}))
    path = out / "report.json"
    _atomic_write(path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def _solve(cfg: RunConfig):
    spec = resolve_problem(cfg)
    mesh = build_mesh(cfg.h, cfg.a, cfg.collar, cfg.eps)
    coeff = coefficients(spec.p)
    u, rep = solve_bracket(mesh, coeff, spec, tol=cfg.tolerance, max_iter=cfg.max_iterations)
    log.info("solved %s: %d sweeps, gap %.3e, residual %.3e", spec.name, rep.iterations, rep.final_gap, rep.residual)
    return spec, mesh, coeff, u, rep


def _solve_report(spec, mesh, coeff, rep) -> dict:
    return {
        "problem": {"name": spec.name, "p": spec.p, "alpha": coeff.alpha, "beta": coeff.beta},
        "mesh": {"h": mesh.h, "a": mesh.a, "collar": mesh.collar, "eps": mesh.eps, "radius_units": mesh.m,
                 "k": mesh.k, "nodes": mesh.n_nodes, "interior_nodes": int(mesh.interior.sum())},
        "solve": {"iterations": rep.iterations, "final_gap": rep.final_gap, "residual": rep.residual,
                  "wall_time": rep.wall_time, "k": rep.k},
    }


def cmd_solve(cfg: RunConfig) -> dict:
    spec, mesh, coeff, u, rep = _solve(cfg)
    return {"solution": (mesh, u, spec.psi1.on(mesh), spec.psi2.on(mesh)),
            "report": _solve_report(spec, mesh, coeff, rep)}


def cmd_simulate(cfg: RunConfig) -> dict:
    from .game import estimate_value

    spec, mesh, coeff, u, rep = _solve(cfg)
    estimates = []
    for i, pt in enumerate(cfg.probes):
        node = mesh.index_of(pt)
        est = estimate_value(mesh, coeff, spec, u, node, cfg.runs, seed=[cfg.seed, i],
                             tol=cfg.tolerance, eta_stop=cfg.eta_stop)
        estimates.append({"probe": list(pt), "node": node, "u": float(u[node]), "mean": est.mean,
                          "stderr": est.stderr, "runs": est.runs, "max_steps_hit": est.max_steps_hit,
                          "mean_steps": est.mean_steps, "terminal_counts": est.terminal_counts})
        log.info("probe %s: game %.6f +- %.6f vs u %.6f", pt, est.mean, est.stderr, u[node])
    report = _solve_report(spec, mesh, coeff, rep)
    report["simulate"] = estimates
    return {"solution": (mesh, u, spec.psi1.on(mesh), spec.psi2.on(mesh)), "report": report}


def cmd_validate(cfg: RunConfig) -> dict:
    from .errors import ConfigError
    from .validate import check_known_solution, known_solution_error

    spec = resolve_problem(cfg)
    if spec.exact is None:
        raise ConfigError(f"dataset {spec.name!r} has no known solution to validate against")
    fd = check_known_solution(spec, seed=cfg.seed, a=cfg.a)
    spec, mesh, coeff, u, rep = _solve(cfg)
    report = _solve_report(spec, mesh, coeff, rep)
    report["validate"] = {"known_solution_error": known_solution_error(u, spec.exact, mesh),
                          "fd_p_laplace_residual_max": fd}
    return {"solution": (mesh, u, spec.psi1.on(mesh), spec.psi2.on(mesh)), "report": report}


def cmd_bench(cfg: RunConfig) -> dict:
    from .bench import p_sweep, radius_table

    rows = radius_table(cfg.h, cfg.radii, cfg.tolerance, cfg.a, cfg.collar, cfg.error_tolerance, cfg.max_iterations,
                        datasets=tuple(cfg.bench_datasets))
    sweep = p_sweep(cfg.h, cfg.radius_in_mesh_units, cfg.p_values, cfg.tolerance, cfg.a, cfg.collar,
                    cfg.max_iterations)
    report = {"bench": {"radius_table": [vars(r) for r in rows],
                        "p_sweep": {_fmt(p): row for p, row in sweep.items()}}}
    return {"bench_rows": rows, "p_sweep": sweep, "report": report}


COMMAND_FUNCS = {"solve": cmd_solve, "simulate": cmd_simulate, "validate": cmd_validate, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpp-obstacle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")
    for name in COMMAND_FUNCS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", help="output directory (overrides `out`)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        overrides = list(args.overrides) if args.command else []
        if args.command and args.out:
            overrides.append(f"out={args.out}")
        cfg = parse_config(args.command, args.config if args.command else None, overrides)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DppError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = COMMAND_FUNCS[cfg.command](cfg)
        paths = emit_outputs(results, cfg)
    except MaxIterationsExceeded as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OutputError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DppError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
