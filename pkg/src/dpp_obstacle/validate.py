"""Oracles that do not go through the DPP operator: finite-difference p-Laplace
residuals, errors against known solutions, and eps-refinement studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGradient, ShapeMismatch
from .fields import ProblemSpec, ScalarField


def p_laplace_residual(f: ScalarField, point, p: float, fd_step: float = 1e-4) -> float:
    """Normalized p-Laplacian (p-2) * Delta_inf f + Delta f at ``point`` by central differences.

    The factor |grad f|^(p-2) is left out, so the value is only defined where
    the gradient does not vanish; below ``1e3 * fd_step**2`` DegenerateGradient
    is raised.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    x, y = float(point[0]), float(point[1])
    s = fd_step

    def ev(dx, dy):
        return float(f(x + dx * s, y + dy * s))

    c = ev(0, 0)
    e, w, n, so = ev(1, 0), ev(-1, 0), ev(0, 1), ev(0, -1)
    fx = (e - w) / (2 * s)
    fy = (n - so) / (2 * s)
    fxx = (e - 2 * c + w) / s**2
    fyy = (n - 2 * c + so) / s**2
    fxy = (ev(1, 1) - ev(1, -1) - ev(-1, 1) + ev(-1, -1)) / (4 * s**2)
    grad2 = fx * fx + fy * fy
    if math.sqrt(grad2) < 1e3 * s**2:
        raise DegenerateGradient(f"|grad| = {math.sqrt(grad2):.3e} at {point}")
    lap_inf = (fx * fx * fxx + 2 * fx * fy * fxy + fy * fy * fyy) / grad2
    return (p - 2) * lap_inf + fxx + fyy


def known_solution_error(u, exact: ScalarField, mesh) -> float:
    """max over interior nodes of |u - exact|."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ShapeMismatch(f"expected {mesh.n_nodes} values, got shape {u.shape}")
    return float(np.max(np.abs(u - exact.on(mesh))[mesh.interior]))


def check_known_solution(spec: ProblemSpec, n_points: int = 25, seed=0, a: float = 1.0,
                         fd_step: float = 1e-4) -> float:
    """Largest |normalized p-Laplacian| of ``spec.exact`` over random points of (-a, a)^2."""
    if spec.exact is None:
        raise ValueError(f"dataset {spec.name} has no known solution")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-a, a, size=(n_points, 2))
    return max(abs(p_laplace_residual(spec.exact, pt, spec.p, fd_step)) for pt in pts)


@dataclass
class RefinementReport:
    radii: list[int]
    probe: np.ndarray = field(repr=False)
    solutions: list[np.ndarray] = field(repr=False)
    successive_diffs: list[float]
    iterations: list[int] = field(default_factory=list)


def refinement_study(spec: ProblemSpec, h: float, radii, tol: float, a: float = 1.0, collar: float = 0.2,
                     max_iter: int | None = None) -> RefinementReport:
    """Solve on one lattice for each radius (in mesh units) and compare consecutive solutions.

    With ``h`` fixed every radius shares the same lattice, so the probe set is
    simply its interior nodes and no interpolation is needed.
    """
    from .dpp import DEFAULT_MAX_ITER, coefficients, solve_bracket
    from .mesh import build_mesh

    radii = [int(r) for r in radii]
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    coeff = coefficients(spec.p)
    sols, iters, probe = [], [], None
    for r in radii:
        mesh = build_mesh(h, a, collar, r * h)
        if probe is None:
            probe = mesh.interior_indices
        u, rep = solve_bracket(mesh, coeff, spec, tol=tol, max_iter=max_iter or DEFAULT_MAX_ITER)
        sols.append(u[probe])
        iters.append(rep.iterations)
    diffs = [float(np.max(np.abs(s1 - s0))) for s0, s1 in zip(sols, sols[1:])]
    return RefinementReport(radii=radii, probe=probe, solutions=sols, successive_diffs=diffs, iterations=iters)
