import numpy as np
import pytest

from mespbound.exact import solve_exact
from mespbound.instance import Instance, gen_side_constraints, random_instance

C2 = np.array([[2.0, 1.0], [1.0, 2.0]])
D234 = np.diag([2.0, 3.0, 4.0])

# lines printed after the run by pytest_terminal_summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def central_diff(f, x, h=1e-6):
    """Central differences of a scalar or vector function along each coordinate."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.array(cols)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def interior_point(rng, n, s):
    """A random point of {sum x = s, 0 < x < 1}: a mix of s-subset indicators pulled toward the centre."""
    verts = np.zeros((n, n))
    for row in verts:
        row[rng.choice(n, s, replace=False)] = 1.0
    y = rng.dirichlet(np.ones(n)) @ verts
    return 0.8 * y + 0.2 * (s / n)


def exact_feasible(cand):
    return solve_exact(cand).feasible


def make_suite(seed, count, n_range=(4, 10)):
    """Seeded random instances; every odd one carries 1 to 3 side constraints that cut off the MESP optimum.

    Returns a list of ``(instance, exact_result)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        s = int(rng.integers(1, n))
        inst = random_instance(rng, n, s)
        ex = solve_exact(inst)
        if len(out) % 2 == 1:
            m = int(rng.integers(1, 4))
            x = np.zeros(n)
            x[list(ex.optima[0])] = 1.0
            try:
                inst = gen_side_constraints(inst, m, rng, x, check=exact_feasible)
            except ArithmeticError:
                continue  # e.g. s = n - 1 leaves no room for a cut that keeps a feasible set
            ex = solve_exact(inst)
        out.append((inst, ex))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def c2():
    return Instance(C2, 1)


@pytest.fixture
def d234():
    return Instance(D234, 2)
