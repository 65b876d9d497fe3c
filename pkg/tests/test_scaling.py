import numpy as np
import pytest

from conftest import make_suite
from mespbound.bqp import random_member_points
from mespbound.errors import InputError
from mespbound.instance import Instance, random_instance
from mespbound.scaling import (
    BoundOracle,
    normalize_method,
    optimize_g_scaling,
    optimize_o_scaling,
    solve_bound,
)


def _best_nonincreasing(trace):
    vals = [v for _, v, _ in trace]
    return all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_method_names():
    assert normalize_method("ddfact-comp") == "ddfact_comp"
    with pytest.raises(InputError):
        normalize_method("bqp_solve")


def test_g_linx_monotone_contract(d234):
    res = optimize_g_scaling("linx", d234, None, 25)
    base = solve_bound("linx", d234).bound
    assert res.best_value <= base + 1e-8
    assert res.best_value <= res.start_value + 1e-8
    assert _best_nonincreasing(res.trace)
    assert np.all(res.Y.gamma > 0)


def test_g_ddfact_stationary_on_mesp(rng):
    for _ in range(5):
        inst = random_instance(rng, int(rng.integers(5, 9)))
        res = optimize_g_scaling("ddfact", inst, None, 10)
        assert res.trace[0][2] <= 1e-4


def test_g_ddfact_improves_some_constrained_instance():
    drops = []
    for inst, _ in make_suite(2024, 12):
        if inst.m == 0:
            continue
        res = optimize_g_scaling("ddfact", inst, None, 10)
        drops.append(res.start_value - res.best_value)
    assert max(drops) > 1e-6


def test_g_ddfact_recentred(rng):
    inst = make_suite(2024, 2)[1][0]
    res = optimize_g_scaling("ddfact", inst, np.exp(rng.uniform(-1, 1, inst.n)), 5)
    assert abs(np.mean(res.Y.log)) <= 1e-12


def test_o_ddfact_returns_start():
    inst = random_instance(np.random.default_rng(3), 7, 3)
    res = optimize_o_scaling("ddfact", inst, 2.5)
    assert res.status == "converged" and len(res.trace) == 1
    assert res.gamma == pytest.approx(2.5)


def test_o_linx_stationary(d234):
    res = optimize_o_scaling("linx", d234)
    assert res.status == "converged"
    assert res.trace[-1][2] < 1e-10
    assert res.best_value <= solve_bound("linx", d234).bound + 1e-10


def test_o_linx_convex_along_line(rng):
    inst = random_instance(rng, 7, 3)
    oracle = BoundOracle("linx", inst, tol=1e-10)
    ts = np.linspace(-2, 2, 21)
    vals = np.array([oracle.solve(np.exp(t) * np.ones(7)).bound for t in ts])
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    assert second.min() >= -1e-8


def test_o_bqp_pointwise(rng):
    inst = random_instance(rng, 5, 2)
    p = random_member_points(rng, 5, 2, 1)[0]
    res = optimize_o_scaling("bqp_pointwise", inst, point=p)
    assert res.status == "converged" and res.trace[-1][2] < 1e-10
    with pytest.raises(InputError):
        optimize_o_scaling("bqp_pointwise", inst)


def test_envelope_gradient(rng):
    for method in ("linx", "ddfact", "ddfact_comp"):
        inst = make_suite(7, 2)[1][0]
        oracle = BoundOracle(method, inst, tol=1e-10)
        u = rng.uniform(-0.5, 0.5, inst.n)
        g = oracle.grad_log(oracle.solve(np.exp(u)))
        h = 1e-4
        fd = np.array([
            (oracle.solve(np.exp(u + h * ei)).bound - oracle.solve(np.exp(u - h * ei)).bound) / (2 * h)
            for ei in np.eye(inst.n)
        ])
        assert np.max(np.abs(g - fd)) <= 1e-3 * max(1.0, np.max(np.abs(fd)))


def test_ordering_on_suite():
    for inst, _ in make_suite(99, 8):
        none = solve_bound("linx", inst, "none").bound
        o = solve_bound("linx", inst, "o").bound
        g = solve_bound("linx", inst, "g", steps=10).bound
        assert g <= o + 1e-8 <= none + 2e-8


def test_solve_bound_validity_and_extras():
    for inst, exact in make_suite(11, 6):
        for method in ("linx", "ddfact", "ddfact_comp"):
            rep = solve_bound(method, inst, "g", steps=10)
            assert rep.bound >= exact.z - 1e-6
            assert "o_scaling" in rep.extra and "g_scaling" in rep.extra


def test_solve_bound_unknown_mode(d234):
    with pytest.raises(InputError):
        solve_bound("linx", d234, "x")


def test_comp_unavailable_for_singular():
    C = np.diag([1.0, 1.0, 1e-12])
    rep = solve_bound("ddfact_comp", Instance(C, 2), "g")
    assert rep.status == "unavailable" and rep.bound == np.inf
