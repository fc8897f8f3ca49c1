import numpy as np
import pytest

from dpp_obstacle.fields import ProblemSpec, ScalarField

ACCEPTANCE_LINES = []


def lattice_field(mesh, values, name="lattice"):
    """A ScalarField that returns ``values[node]`` at lattice nodes of ``mesh``."""
    values = np.asarray(values, dtype=float).copy()
    half = mesh.n_side // 2

    def func(x, y):
        col = np.rint(np.asarray(x) / mesh.h).astype(int) + half
        row = np.rint(np.asarray(y) / mesh.h).astype(int) + half
        return values[row * mesh.n_side + col]

    return ScalarField(func, name=name)


def random_data(mesh, rng, coincide_frac=0.1):
    """Random node values with psi1 <= psi2 everywhere and psi1 <= f <= psi2 on the collar."""
    n = mesh.n_nodes
    psi1 = rng.uniform(-1.0, 0.5, n)
    gap = rng.uniform(0.0, 1.5, n)
    gap[rng.random(n) < coincide_frac] = 0.0
    psi2 = psi1 + gap
    f = psi1 + rng.random(n) * gap
    return psi1, psi2, f


def random_spec(mesh, rng, p=None):
    psi1, psi2, f = random_data(mesh, rng)
    if p is None:
        p = float(rng.choice([2.0, rng.uniform(2.0, 60.0)]))
    return spec_from_values(mesh, p, psi1, psi2, f)


def spec_from_values(mesh, p, psi1, psi2, f):
    return ProblemSpec(p, lattice_field(mesh, psi1, "psi1"), lattice_field(mesh, psi2, "psi2"),
                       lattice_field(mesh, f, "f"), name="random")


@pytest.fixture
def rng():
    return np.random.default_rng(20151101)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
