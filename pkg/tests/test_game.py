import numpy as np
import pytest
from scipy import stats

from conftest import random_data, spec_from_values
from dpp_obstacle.dpp import coefficients, solve_bracket
from dpp_obstacle.errors import NonSolvedInput, StepCapExceeded
from dpp_obstacle.fields import ProblemSpec, ScalarField, builtin_dataset
from dpp_obstacle.game import (
    Game,
    StopRule,
    Terminal,
    draw_transitions,
    estimate_value,
    greedy_strategies,
    simulate_run,
    summarize,
)
from dpp_obstacle.mesh import build_mesh


def chain_value(mesh, coeff, spec, strategies, stops):
    """Exact expected payoff of the Markov chain induced by fixed strategies."""
    n = mesh.n_nodes
    psi1, psi2, f = spec.psi1.on(mesh), spec.psi2.on(mesh), spec.f.on(mesh)
    P = np.zeros((n, n))
    b = np.zeros(n)
    A = np.eye(n)
    for x in range(n):
        if not mesh.interior[x]:
            b[x] = f[x]
            continue
        if stops.stop_I[x] or stops.stop_II[x]:
            b[x] = psi2[x] if stops.stop_II[x] else psi1[x]
            continue
        P[x, strategies[0].mover[x]] += coeff.alpha / 2
        P[x, strategies[1].mover[x]] += coeff.alpha / 2
        for d in mesh.flat_offsets:
            P[x, x + d] += coeff.beta / mesh.k
    A -= P
    return np.linalg.solve(A, b)


@pytest.fixture
def chain_mesh():
    return build_mesh(0.1, 0.25, 0.3, 0.2)


def test_greedy_on_linear_function():
    mesh = build_mesh(0.1, 1.05, 0.35, 0.3)
    u = mesh.nodes[:, 0].copy()
    hi, lo = greedy_strategies(mesh, u)
    c = mesh.index_of((0.0, 0.0))
    np.testing.assert_allclose(mesh.nodes[hi.mover[c]], [0.3, 0.0], atol=1e-12)
    np.testing.assert_allclose(mesh.nodes[lo.mover[c]], [-0.3, 0.0], atol=1e-12)
    assert hi.mover[0] == -1


def test_greedy_ties_pick_lowest_index():
    mesh = build_mesh(0.1, 1.05, 0.35, 0.3)
    hi, lo = greedy_strategies(mesh, np.zeros(mesh.n_nodes))
    for x in mesh.interior_indices[:20]:
        first = x + mesh.flat_offsets[0]
        assert hi.mover[x] == lo.mover[x] == first


def test_start_on_collar_exits_immediately(chain_mesh):
    spec = ProblemSpec(2, ScalarField.constant(-1), ScalarField.constant(1), ScalarField.constant(0.25))
    u = np.zeros(chain_mesh.n_nodes)
    out = simulate_run(chain_mesh, coefficients(2), spec, greedy_strategies(chain_mesh, u),
                       StopRule.disabled(chain_mesh), 0, np.random.default_rng(0))
    assert out.steps == 0 and out.terminal is Terminal.EXIT_BOUNDARY and out.payoff == 0.25


def test_stop_payoffs(chain_mesh):
    spec = ProblemSpec(2, ScalarField.constant(-1), ScalarField.constant(1), ScalarField.constant(0.0))
    c = chain_mesh.index_of((0.0, 0.0))
    strat = greedy_strategies(chain_mesh, np.zeros(chain_mesh.n_nodes))
    off = np.zeros(chain_mesh.n_nodes, dtype=bool)
    on = chain_mesh.interior.copy()
    rng = np.random.default_rng(1)
    cases = [(on, off, Terminal.STOPPED_BY_I, -1.0), (off, on, Terminal.STOPPED_BY_II, 1.0),
             (on, on, Terminal.TIE_STOP, 1.0)]
    for s1, s2, term, pay in cases:
        out = simulate_run(chain_mesh, coefficients(2), spec, strat, StopRule(s1, s2, 0.0), c, rng)
        assert out.terminal is term and out.payoff == pay and out.steps == 0


@pytest.mark.parametrize("p", [2.0, 4.0])
def test_sampler_matches_transition_matrix(chain_mesh, p):
    mesh = chain_mesh
    rng = np.random.default_rng(7)
    psi1, psi2, f = random_data(mesh, rng, coincide_frac=0.0)
    spec = spec_from_values(mesh, p, psi1, psi2, f)
    coeff = coefficients(p)
    strat = greedy_strategies(mesh, rng.normal(size=mesh.n_nodes))
    stops = StopRule.disabled(mesh)
    exact = chain_value(mesh, coeff, spec, strat, stops)
    game = Game(mesh, coeff, spec, strat, stops)
    for pt in [(0.0, 0.0), (0.2, -0.1)]:
        x0 = mesh.index_of(pt)
        est = summarize(*game.run_many(x0, 40_000, seed=3))
        assert abs(est.mean - exact[x0]) <= 4 * est.stderr


def test_transition_draws_are_fair():
    rng = np.random.default_rng(11)
    coeff = coefficients(10)
    k = 29
    n = 200_000
    branch, slot = draw_transitions(rng, n, coeff, k)
    for code, prob in ((0, coeff.alpha / 2), (1, coeff.alpha / 2), (2, coeff.beta)):
        sd = np.sqrt(n * prob * (1 - prob))
        assert abs(np.sum(branch == code) - n * prob) <= 4 * sd
    counts = np.bincount(slot, minlength=k)
    assert stats.chisquare(counts).pvalue > 1e-4


def test_path_moves_stay_within_radius():
    mesh = build_mesh(0.1, 1.05, 0.35, 0.3)
    spec = builtin_dataset("try1_p2", p=6)
    coeff = coefficients(6)
    u, _ = solve_bracket(mesh, coeff, spec, tol=1e-6)
    game = Game(mesh, coeff, spec, greedy_strategies(mesh, u), StopRule.disabled(mesh))
    rng = np.random.default_rng(5)
    for _ in range(20):
        out = game.run(mesh.index_of((0.0, 0.0)), rng, record_path=True)
        pts = mesh.nodes[out.path]
        assert np.all(np.hypot(*np.diff(pts, axis=0).T) <= mesh.eps + 1e-12)
        assert not mesh.interior[out.path[-1]] and all(mesh.interior[out.path[:-1]])


def test_payoffs_within_data_bounds():
    mesh = build_mesh(0.1, 1.05, 0.35, 0.3)
    spec = builtin_dataset("case_b_p10")
    coeff = coefficients(10)
    u, _ = solve_bracket(mesh, coeff, spec, tol=1e-6)
    game = Game(mesh, coeff, spec, greedy_strategies(mesh, u), StopRule.from_solution(mesh, spec, u, 1e-6))
    pay, steps, codes = game.run_many(mesh.index_of((0.2, -0.3)), 2000, seed=2)
    lo = min(spec.psi1.on(mesh).min(), spec.f.on(mesh).min())
    hi = max(spec.psi2.on(mesh).max(), spec.f.on(mesh).max())
    assert np.all(codes >= 0) and np.all((lo <= pay) & (pay <= hi))


@pytest.fixture(scope="module")
def solved_case_b():
    mesh = build_mesh(0.1, 1.0, 0.4, 0.3)
    spec = builtin_dataset("case_b_p10")
    coeff = coefficients(10)
    u, _ = solve_bracket(mesh, coeff, spec, tol=1e-6)
    return mesh, coeff, spec, u


def test_estimate_is_deterministic(solved_case_b):
    mesh, coeff, spec, u = solved_case_b
    x0 = mesh.index_of((0.0, 0.0))
    a = estimate_value(mesh, coeff, spec, u, x0, 20_000, seed=9, tol=1e-6, workers=1)
    b = estimate_value(mesh, coeff, spec, u, x0, 20_000, seed=9, tol=1e-6, workers=3)
    assert a == b


def test_stderr_halves_with_four_times_the_runs(solved_case_b):
    mesh, coeff, spec, u = solved_case_b
    x0 = mesh.index_of((0.0, 0.0))
    a = estimate_value(mesh, coeff, spec, u, x0, 10_000, seed=1, tol=1e-6)
    b = estimate_value(mesh, coeff, spec, u, x0, 40_000, seed=2, tol=1e-6)
    assert 0.8 <= (a.stderr / b.stderr) / 2 <= 1.2


def test_step_cap(solved_case_b):
    mesh, coeff, spec, u = solved_case_b
    game = Game(mesh, coeff, spec, greedy_strategies(mesh, u), StopRule.disabled(mesh))
    with pytest.raises(StepCapExceeded) as info:
        game.run(mesh.index_of((0.0, 0.0)), np.random.default_rng(0), max_steps=1, record_path=True)
    assert info.value.outcome.capped and info.value.outcome.steps == 1
    est = summarize(*game.run_many(mesh.index_of((0.0, 0.0)), 100, seed=0, max_steps=1))
    assert est.max_steps_hit + sum(est.terminal_counts.values()) == 100


def test_unsolved_input_rejected(solved_case_b):
    mesh, coeff, spec, u = solved_case_b
    with pytest.raises(NonSolvedInput):
        estimate_value(mesh, coeff, spec, u + 0.5 * mesh.interior, mesh.index_of((0.0, 0.0)), 10, seed=0, tol=1e-6)
