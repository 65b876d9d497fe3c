import numpy as np
import pytest

from conftest import C2
from mespbound.instance import random_instance
from mespbound.linx import LinxObjective
from mespbound.relax import Polytope, maximize


def _random_feasible(rng, poly, count):
    """Convex combinations of LP vertices for random objectives."""
    verts = [poly.lp_oracle(rng.standard_normal(poly.n), tie_break=False) for _ in range(3 * poly.n)]
    out = []
    for _ in range(count):
        w = rng.dirichlet(np.ones(len(verts)))
        out.append(w @ np.array(verts))
    return out


def test_linear_objective_one_step():
    poly = Polytope(5, 2)
    c = np.array([1.0, 5.0, 2.0, 4.0, 3.0])
    rep = maximize(poly, lambda x: float(c @ x), lambda x: c)
    assert rep.gap == 0.0 and rep.converged
    assert rep.value == pytest.approx(9.0)
    assert rep.iterations == 1
    assert np.array_equal(rep.x, poly.lp_oracle(c))


def test_linx_c2_value():
    obj = LinxObjective(C2, np.ones(2))
    rep = maximize(Polytope(2, 1), obj.value, obj.grad)
    assert rep.gap <= 1e-6
    assert 0.5 * np.log(5) - 1e-12 <= rep.upper <= 0.5 * np.log(5) + 1e-6


def test_domain_backtracking():
    # f is -inf outside x_0 < 0.9; the solver must stay inside
    poly = Polytope(3, 1)

    def f(x):
        return np.log(0.9 - x[0]) + np.log(x[1] + 0.1) if x[0] < 0.9 else -np.inf

    def g(x):
        return np.array([-1.0 / (0.9 - x[0]), 1.0 / (x[1] + 0.1), 0.0])

    rep = maximize(poly, f, g, x0=np.array([0.3, 0.3, 0.4]))
    assert np.isfinite(rep.value) and rep.converged
    assert rep.x[1] == pytest.approx(1.0)


@pytest.mark.parametrize("constrained", [False, True])
def test_certificate_soundness(constrained):
    rng = np.random.default_rng(31 + constrained)
    inst = random_instance(rng, 8, 3)
    A = b = None
    if constrained:
        A = np.array([[1.0, 1, 1, 0, 0, 0, 0, 0], [0, 0, 1, 1, 1, 0, 0, 0]])
        b = np.array([1.0, 1.0])
    poly = Polytope(8, 3, A, b)
    obj = LinxObjective(inst.C, np.exp(rng.uniform(-0.5, 0.5, 8)))
    rep = maximize(poly, obj.value, obj.grad, hess=obj.hess)
    assert poly.contains(rep.x)
    for x in _random_feasible(rng, poly, 100):
        assert obj.value(x) <= rep.upper + 1e-8


def test_monotone_values():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, 10, 4)
    obj = LinxObjective(inst.C, np.ones(10))
    poly = Polytope(10, 4)
    # the solver is deterministic, so capped runs replay the iterate sequence
    values = [maximize(poly, obj.value, obj.grad, tol=1e-10, max_iter=k).value for k in range(1, 30)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_without_newton_converges_honestly():
    rng = np.random.default_rng(6)
    inst = random_instance(rng, 8, 3)
    obj = LinxObjective(inst.C, np.ones(8))
    rep = maximize(Polytope(8, 3), obj.value, obj.grad, max_iter=5)
    assert rep.iterations <= 5
    assert rep.gap >= 0.0
    full = maximize(Polytope(8, 3), obj.value, obj.grad, hess=obj.hess, tol=1e-10)
    assert rep.upper >= full.value - 1e-12


def test_interior_point_feasible():
    poly = Polytope(6, 2, np.array([[1.0, 1, 1, 1, 0, 0]]), np.array([1.0]))
    x = poly.interior_point()
    assert poly.contains(x)
