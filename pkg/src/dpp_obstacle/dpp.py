"""Discrete min-max operator and the two-sided monotone (Perron) iteration.

For every interior node the operator averages over its eps-ball stencil

    vbar(p) = alpha/2 * max v + alpha/2 * min v + beta/k * sum v

and clamps the result between the obstacles; collar nodes keep the boundary
data.  Iterating it from the lower obstacle gives a non-decreasing sequence,
from the upper obstacle a non-increasing one, and both squeeze the unique
fixed point.

Sweeps are synchronous.  Sums run over the stencil in ascending node order
and every floating point step involved (fixed-order addition, scaling by a
non-negative constant, max, min) is monotone, so the bracket invariants hold
exactly in floating point, not just up to rounding.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import ExponentOutOfRange, MaxIterationsExceeded, NonFiniteValue, ShapeMismatch
from .fields import ProblemSpec, validate_problem
from .mesh import Mesh

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 200_000


@dataclass(frozen=True)
class Coefficients:
    alpha: float
    beta: float


def coefficients(p: float, N: int = 2) -> Coefficients:
    """Weights alpha = (p-2)/(p+N) and beta = 1 - alpha."""
    p = float(p)
    if not np.isfinite(p) or p < 2:
        raise ExponentOutOfRange(f"p must be a finite real >= 2, got {p}")
    if N < 1:
        raise ValueError("dimension must be >= 1")
    alpha = (p - 2) / (p + N)
    return Coefficients(alpha=alpha, beta=1.0 - alpha)


@dataclass
class BracketState:
    lower: np.ndarray
    upper: np.ndarray
    iteration: int
    gap: float


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_gap: float
    residual: float
    wall_time: float
    k: int
    converged: bool = True


def thread_count() -> int:
    """Worker count from DPP_THREADS (0 = one per CPU, default 1)."""
    raw = os.environ.get("DPP_THREADS", "1").strip() or "1"
    n = int(raw)
    if n <= 0:
        n = os.cpu_count() or 1
    return n


class Operator:
    """The clamped stencil operator for a fixed mesh, weights, and problem data.

    Obstacle and boundary values are sampled once; ``__call__`` applies one
    synchronous sweep.
    """

    def __init__(self, mesh: Mesh, coeff: Coefficients, spec: ProblemSpec, workers: int | None = None):
        self.mesh = mesh
        self.coeff = coeff
        self.spec = spec
        self.psi1 = spec.psi1.on(mesh)
        self.psi2 = spec.psi2.on(mesh)
        self.f = spec.f.on(mesh)
        self.workers = thread_count() if workers is None else max(1, int(workers))
        sl = mesh.interior_slice
        self._lo, self._n = sl.start, mesh.n_int
        grid = mesh.shape
        self._psi1_int = self.psi1.reshape(grid)[sl, sl]
        self._psi2_int = self.psi2.reshape(grid)[sl, sl]
        m = mesh.m
        self._rows = [(dj, int(np.floor(np.sqrt(m * m - dj * dj) + 1e-12))) for dj in range(-m, m + 1)]

    def _block(self, V: np.ndarray, r0: int, r1: int) -> np.ndarray:
        """Clamped update for interior rows r0..r1 (offsets into the interior block)."""
        lo, n, m = self._lo, self._n, self.mesh.m
        rows = slice(lo + r0, lo + r1)
        cols = slice(lo, lo + n)
        acc = None
        for dj, dis in self._offsets_by_row():
            rs = slice(rows.start + dj, rows.stop + dj)
            for di in dis:
                piece = V[rs, cols.start + di:cols.stop + di]
                if acc is None:
                    acc = piece.copy()
                else:
                    acc += piece
        a2 = 0.5 * self.coeff.alpha
        bk = self.coeff.beta / self.mesh.k
        if a2 > 0:
            band = V[rows.start - m:rows.stop + m]
            mx = mn = None
            cache_max, cache_min = {}, {}
            for dj, w in self._rows:
                if w not in cache_max:
                    cache_max[w] = maximum_filter1d(band, size=2 * w + 1, axis=1)
                    cache_min[w] = minimum_filter1d(band, size=2 * w + 1, axis=1)
                seg = slice(m + dj, m + dj + (r1 - r0))
                rmax = cache_max[w][seg, cols]
                rmin = cache_min[w][seg, cols]
                mx = rmax.copy() if mx is None else np.maximum(mx, rmax)
                mn = rmin.copy() if mn is None else np.minimum(mn, rmin)
            vbar = a2 * mx
            vbar += a2 * mn
            vbar += bk * acc
        else:
            vbar = bk * acc
        return np.maximum(self._psi1_int[r0:r1], np.minimum(self._psi2_int[r0:r1], vbar))

    def _offsets_by_row(self):
        for dj, w in self._rows:
            yield dj, range(-w, w + 1)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise ShapeMismatch(f"expected {self.mesh.n_nodes} values, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteValue("grid function contains NaN or infinite values")
        V = v.reshape(self.mesh.shape)
        n = self._n
        if self.workers > 1 and n >= 2 * self.workers:
            bounds = np.linspace(0, n, self.workers + 1).astype(int)
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(lambda b: self._block(V, b[0], b[1]), zip(bounds[:-1], bounds[1:])))
            inner = np.vstack(parts)
        else:
            inner = self._block(V, 0, n)
        out = self.f.copy().reshape(self.mesh.shape)
        sl = self.mesh.interior_slice
        out[sl, sl] = inner
        return out.ravel()


def apply_Tbar(mesh: Mesh, coeff: Coefficients, spec: ProblemSpec, v: np.ndarray) -> np.ndarray:
    """One synchronous sweep of the clamped operator; collar nodes get F."""
    return Operator(mesh, coeff, spec)(v)


def residual(mesh: Mesh, coeff: Coefficients, spec: ProblemSpec, u: np.ndarray, op: Operator | None = None) -> float:
    """max over interior nodes of |Tbar u - u|."""
    op = op or Operator(mesh, coeff, spec)
    u = np.asarray(u, dtype=float)
    tu = op(u)
    return float(np.max(np.abs(tu - u)[mesh.interior]))


def bracket_iterates(op: Operator) -> Iterator[BracketState]:
    """Yield the bracket (lower, upper) starting from the obstacles, forever."""
    interior = op.mesh.interior
    lower = np.where(interior, op.psi1, op.f)
    upper = np.where(interior, op.psi2, op.f)
    it = 0
    while True:
        yield BracketState(lower, upper, it, float(np.max(upper - lower)))
        lower = op(lower)
        upper = op(upper)
        it += 1


def solve_bracket(mesh: Mesh, coeff: Coefficients, spec: ProblemSpec, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, callback=None, workers: int | None = None):
    """Iterate the bracket until max(upper - lower) < tol.

    Returns ``(u, report)`` with ``u = (lower + upper) / 2``, which is within
    ``tol`` of the exact fixed point everywhere.  ``callback(state)`` is
    invoked with every ``BracketState`` including the initial one.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    validate_problem(spec, mesh, strict=True)
    op = Operator(mesh, coeff, spec, workers=workers)
    t0 = time.perf_counter()
    for state in bracket_iterates(op):
        if callback is not None:
            callback(state)
        if state.gap < tol or state.iteration >= max_iter:
            break
    u = 0.5 * (state.lower + state.upper)
    res = residual(mesh, coeff, spec, u, op=op)
    converged = state.gap < tol
    report = SolveReport(iterations=state.iteration, final_gap=state.gap, residual=res,
                         wall_time=time.perf_counter() - t0, k=mesh.k, converged=converged)
    if not converged:
        raise MaxIterationsExceeded(
            f"gap {state.gap:.3e} still >= tol {tol:.3e} after {max_iter} sweeps", report=report, solution=u)
    return u, report
