"""Benchmark manifest and the two benchmark tables (radius sweep and p sweep).

The radius table averages runtime and iteration counts over the five
obstacle datasets and reports the two known-solution errors.  The p sweep
crosses six boundary conditions with three obstacle configurations.  Three of
the boundary conditions (zero, parabolic, hyperbolic) come from the reference
examples; ``linear_x``, ``saddle`` and ``wave`` are synthetic fillers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpp import coefficients, solve_bracket
from .fields import INACTIVE, ProblemSpec, ScalarField, builtin_dataset, hyperbolic_f, smooth_psi1, smooth_psi2
from .mesh import build_mesh
from .validate import known_solution_error

BENCH_DATASETS = ("try1_p2", "try1_p100", "case_a_p10", "case_b_p10", "case_c_p10")

BOUNDARY_CONDITIONS = {
    "zero": ScalarField.constant(0.0, name="0"),
    "parabolic": ScalarField(lambda x, y: 1 - 2 * y**2, name="1-2y^2"),
    "hyperbolic": ScalarField(hyperbolic_f, name="clamp(2-(x+y)^2)"),
    "linear_x": ScalarField(lambda x, y: x, name="x (synthetic)"),
    "saddle": ScalarField(lambda x, y: x**2 - y**2, name="x^2-y^2 (synthetic)"),
    "wave": ScalarField(lambda x, y: 0.5 * np.sin(np.pi * x) * np.cos(np.pi * y), name="sin*cos/2 (synthetic)"),
}

OBSTACLE_SETS = ("no_obstacle", "one_obstacle", "two_obstacles")


def sweep_problem(bc: str, obstacles: str, p: float) -> ProblemSpec:
    lower = ScalarField(smooth_psi1, name="smooth.psi1")
    upper = ScalarField(smooth_psi2, name="smooth.psi2")
    if obstacles == "no_obstacle":
        lower = ScalarField.constant(-INACTIVE)
        upper = ScalarField.constant(INACTIVE)
    elif obstacles == "one_obstacle":
        upper = ScalarField.constant(INACTIVE)
    elif obstacles != "two_obstacles":
        raise ValueError(f"unknown obstacle configuration {obstacles!r}")
    return ProblemSpec(p, lower, upper, BOUNDARY_CONDITIONS[bc], name=f"{bc}/{obstacles}")


@dataclass
class RadiusRow:
    radius_units: int
    k: int
    runtime_s: float
    iterations: float
    error1: float
    error2: float


def radius_table(h, radii, tol, a=1.0, collar=0.2, error_tol=1e-8, max_iter=200_000, datasets=BENCH_DATASETS):
    rows = []
    for r in radii:
        mesh = build_mesh(h, a, collar, r * h)
        times, iters = [], []
        for name in datasets:
            spec = builtin_dataset(name)
            _, rep = solve_bracket(mesh, coefficients(spec.p), spec, tol=tol, max_iter=max_iter)
            times.append(rep.wall_time)
            iters.append(rep.iterations)
        errs = []
        for name in ("harmonic_expsin_p2", "harmonic_quadratic_p2"):
            spec = builtin_dataset(name)
            u, _ = solve_bracket(mesh, coefficients(spec.p), spec, tol=error_tol, max_iter=max_iter)
            errs.append(known_solution_error(u, spec.exact, mesh))
        rows.append(RadiusRow(r, mesh.k, float(np.mean(times)), float(np.mean(iters)), errs[0], errs[1]))
    return rows


def p_sweep(h, radius, p_values, tol, a=1.0, collar=0.2, max_iter=200_000, bcs=None):
    """Mean iteration count per (p, obstacle configuration) over the boundary conditions."""
    mesh = build_mesh(h, a, collar, radius * h)
    bcs = list(bcs or BOUNDARY_CONDITIONS)
    table = {}
    for p in p_values:
        coeff = coefficients(p)
        row = {}
        for obst in OBSTACLE_SETS:
            counts = []
            for bc in bcs:
                _, rep = solve_bracket(mesh, coeff, sweep_problem(bc, obst, p), tol=tol, max_iter=max_iter)
                counts.append(rep.iterations)
            row[obst] = float(np.mean(counts))
        table[float(p)] = row
    return table
