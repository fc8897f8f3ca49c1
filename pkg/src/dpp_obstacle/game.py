"""Monte-Carlo tug-of-war with noise and double stopping on the mesh lattice.

At every turn, unless the token sits on the collar or a player decides to
stop, a coin chooses the move: with probability alpha/2 Player I moves it
(greedy maximizer of the solved function), with alpha/2 Player II does
(greedy minimizer), and with probability beta it jumps to a uniformly chosen
node of the current stencil.  Exiting pays F, Player I stopping pays psi1,
Player II stopping (or both at once) pays psi2.

Runs are simulated in fixed-size chunks, each with its own generator spawned
from ``numpy.random.SeedSequence(seed)``; chunk boundaries do not depend on
the worker count, so estimates are reproducible bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .dpp import DEFAULT_TOL, Coefficients, Operator, residual, thread_count
from .errors import NonSolvedInput, ShapeMismatch, StepCapExceeded
from .fields import ProblemSpec
from .mesh import Mesh

DEFAULT_MAX_STEPS = 10_000_000
CHUNK = 8192

_BRANCH_I, _BRANCH_II, _BRANCH_NOISE = 0, 1, 2


class Terminal(IntEnum):
    EXIT_BOUNDARY = 0
    STOPPED_BY_I = 1
    STOPPED_BY_II = 2
    TIE_STOP = 3

    @property
    def label(self) -> str:
        return {0: "ExitBoundary", 1: "StoppedByI", 2: "StoppedByII", 3: "TieStop"}[int(self)]


@dataclass(frozen=True)
class Strategy:
    """Destination node per source node for one player (-1 on collar nodes)."""

    mover: np.ndarray


@dataclass(frozen=True)
class StopRule:
    stop_I: np.ndarray    # bool per node
    stop_II: np.ndarray   # bool per node
    eta: float

    @classmethod
    def disabled(cls, mesh: Mesh) -> "StopRule":
        off = np.zeros(mesh.n_nodes, dtype=bool)
        return cls(off, off.copy(), 0.0)

    @classmethod
    def from_solution(cls, mesh: Mesh, spec: ProblemSpec, u, eta: float) -> "StopRule":
        """Player I stops where u <= psi1 + eta, Player II where u >= psi2 - eta."""
        u = np.asarray(u, dtype=float)
        psi1, psi2 = spec.psi1.on(mesh), spec.psi2.on(mesh)
        interior = mesh.interior
        return cls(interior & (u <= psi1 + eta), interior & (u >= psi2 - eta), float(eta))


@dataclass
class GameOutcome:
    payoff: float
    steps: int
    terminal: Terminal | None
    capped: bool = False
    path: list[int] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    stderr: float
    runs: int
    max_steps_hit: int
    mean_steps: float = 0.0
    terminal_counts: dict = field(default_factory=dict)


def greedy_strategies(mesh: Mesh, u) -> tuple[Strategy, Strategy]:
    """Per-node argmax (Player I) and argmin (Player II) of u over the stencil.

    Ties go to the lowest node index.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ShapeMismatch(f"expected {mesh.n_nodes} values, got shape {u.shape}")
    nodes = mesh.interior_indices
    offs = mesh.flat_offsets
    best_hi = nodes + offs[0]
    best_lo = best_hi.copy()
    v_hi = u[best_hi].copy()
    v_lo = v_hi.copy()
    for d in offs[1:]:  # ascending index order, so strict comparison keeps the first hit
        cand = nodes + d
        vals = u[cand]
        up = vals > v_hi
        best_hi[up], v_hi[up] = cand[up], vals[up]
        down = vals < v_lo
        best_lo[down], v_lo[down] = cand[down], vals[down]
    hi = np.full(mesh.n_nodes, -1, dtype=np.int64)
    lo = hi.copy()
    hi[nodes], lo[nodes] = best_hi, best_lo
    return Strategy(hi), Strategy(lo)


def draw_transitions(rng: np.random.Generator, n: int, coeff: Coefficients, k: int):
    """Branch codes (0 = Player I, 1 = Player II, 2 = noise) and uniform stencil slots."""
    coin = rng.random(n)
    branch = np.where(coin < 0.5 * coeff.alpha, _BRANCH_I, np.where(coin < coeff.alpha, _BRANCH_II, _BRANCH_NOISE))
    slot = rng.integers(0, k, size=n)
    return branch, slot


class Game:
    """Precomputed tables for one (mesh, weights, data, strategies, stop rule)."""

    def __init__(self, mesh: Mesh, coeff: Coefficients, spec: ProblemSpec,
                 strategies: tuple[Strategy, Strategy], stops: StopRule):
        self.mesh = mesh
        self.coeff = coeff
        self.interior = mesh.interior
        self.psi1 = spec.psi1.on(mesh)
        self.psi2 = spec.psi2.on(mesh)
        self.f = spec.f.on(mesh)
        self.move_I = strategies[0].mover
        self.move_II = strategies[1].mover
        self.stop_I = stops.stop_I
        self.stop_II = stops.stop_II
        self.offsets = mesh.flat_offsets

    def _resolve(self, pos):
        """Terminal code per position (-1 if the game continues) and its payoff."""
        collar = ~self.interior[pos]
        s1 = self.stop_I[pos] & ~collar
        s2 = self.stop_II[pos] & ~collar
        code = np.full(pos.shape, -1, dtype=np.int64)
        code[s1 & ~s2] = Terminal.STOPPED_BY_I
        code[s2 & ~s1] = Terminal.STOPPED_BY_II
        code[s1 & s2] = Terminal.TIE_STOP
        code[collar] = Terminal.EXIT_BOUNDARY
        payoff = np.where(collar, self.f[pos], np.where(code == Terminal.STOPPED_BY_I, self.psi1[pos], self.psi2[pos]))
        return code, payoff

    def _step(self, pos, rng):
        branch, slot = draw_transitions(rng, len(pos), self.coeff, len(self.offsets))
        return np.where(branch == _BRANCH_I, self.move_I[pos],
                        np.where(branch == _BRANCH_II, self.move_II[pos], pos + self.offsets[slot]))

    def run(self, x0: int, rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS,
            record_path: bool = False) -> GameOutcome:
        pos = np.array([int(x0)], dtype=np.int64)
        path = [int(x0)] if record_path else None
        for steps in range(max_steps + 1):
            code, payoff = self._resolve(pos)
            if code[0] >= 0:
                return GameOutcome(float(payoff[0]), steps, Terminal(int(code[0])), path=path)
            if steps == max_steps:
                break
            pos = self._step(pos, rng)
            if record_path:
                path.append(int(pos[0]))
        partial = GameOutcome(float("nan"), max_steps, None, capped=True, path=path)
        raise StepCapExceeded(f"run from node {x0} did not end within {max_steps} steps", outcome=partial)

    def run_chunk(self, x0: int, n: int, rng: np.random.Generator, max_steps: int):
        """Simulate n runs in lockstep; returns (payoffs, steps, codes), code -1 = capped."""
        payoff = np.full(n, np.nan)
        steps = np.zeros(n, dtype=np.int64)
        codes = np.full(n, -1, dtype=np.int64)
        active = np.arange(n)
        pos = np.full(n, int(x0), dtype=np.int64)
        for t in range(max_steps + 1):
            code, pay = self._resolve(pos)
            done = code >= 0
            if done.any():
                idx = active[done]
                payoff[idx], codes[idx], steps[idx] = pay[done], code[done], t
                active, pos = active[~done], pos[~done]
            if active.size == 0 or t == max_steps:
                break
            pos = self._step(pos, rng)
        steps[active] = max_steps
        return payoff, steps, codes

    def run_many(self, x0: int, runs: int, seed, max_steps: int = DEFAULT_MAX_STEPS, workers: int | None = None):
        n_chunks = max(1, math.ceil(runs / CHUNK))
        seeds = np.random.SeedSequence(seed).spawn(n_chunks)
        sizes = [min(CHUNK, runs - i * CHUNK) for i in range(n_chunks)]

        def job(i):
            return self.run_chunk(x0, sizes[i], np.random.default_rng(seeds[i]), max_steps)

        if workers is None:
            workers = thread_count()
        if workers > 1 and n_chunks > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(job, range(n_chunks)))
        else:
            parts = [job(i) for i in range(n_chunks)]
        return tuple(np.concatenate(cols) for cols in zip(*parts))


def simulate_run(mesh: Mesh, coeff: Coefficients, spec: ProblemSpec, strategies, stops: StopRule, x0: int,
                 rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS,
                 record_path: bool = False) -> GameOutcome:
    """Play one game from node ``x0``.

    Raises StepCapExceeded (carrying the partial outcome) if the token is
    still in play after ``max_steps`` moves.
    """
    return Game(mesh, coeff, spec, strategies, stops).run(x0, rng, max_steps, record_path)


def summarize(payoffs, steps, codes) -> ValueEstimate:
    ok = codes >= 0
    vals = payoffs[ok]
    n = int(vals.size)
    mean = float(np.mean(vals)) if n else float("nan")
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    counts = {Terminal(c).label: int(np.sum(codes == c)) for c in range(4)}
    return ValueEstimate(mean=mean, stderr=stderr, runs=int(len(payoffs)), max_steps_hit=int(np.sum(~ok)),
                         mean_steps=float(np.mean(steps)) if len(steps) else 0.0, terminal_counts=counts)


def estimate_value(mesh: Mesh, coeff: Coefficients, spec: ProblemSpec, u, x0: int, runs: int, seed,
                   tol: float = DEFAULT_TOL, eta_stop: float | None = None,
                   max_steps: int = DEFAULT_MAX_STEPS, workers: int | None = None) -> ValueEstimate:
    """Estimate the game value at ``x0`` with greedy strategies and contact stopping built from ``u``.

    ``u`` must be a solved grid function: its residual may not exceed
    ``10 * tol``.  Capped runs are excluded from the mean and counted in
    ``max_steps_hit``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ShapeMismatch(f"expected {mesh.n_nodes} values, got shape {u.shape}")
    res = residual(mesh, coeff, spec, u, op=Operator(mesh, coeff, spec, workers=1))
    if res > 10 * tol:
        raise NonSolvedInput(f"residual {res:.3e} exceeds 10*tol = {10 * tol:.3e}")
    eta = tol if eta_stop is None else eta_stop
    game = Game(mesh, coeff, spec, greedy_strategies(mesh, u), StopRule.from_solution(mesh, spec, u, eta))
    return summarize(*game.run_many(x0, runs, seed, max_steps, workers))
