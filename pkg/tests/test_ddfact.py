import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import C2, D234, central_diff, interior_point, rel_err
from mespbound.ddfact import (
    DDFactObjective,
    compute_iota,
    eval_f_ddfact,
    factorize,
    gamma_s,
    grad_logY_ddfact,
    grad_x_ddfact,
    hessian_x_ddfact,
    solve_ddfact,
    solve_ddfact_comp,
)
from mespbound.errors import DomainError
from mespbound.exact import solve_exact
from mespbound.instance import Instance, random_instance


@pytest.mark.parametrize(
    "lam, s, value, beta",
    [
        ((4, 2, 1), 2, np.log(12), (1 / 4, 1 / 3, 1 / 3)),
        ((1, 1, 1, 1), 2, 2 * np.log(2), (0.5,) * 4),
        ((2, 0), 1, np.log(2), (0.5, 0.5)),
    ],
)
def test_gamma_examples(lam, s, value, beta):
    ge = gamma_s(np.array(lam, dtype=float), s)
    assert ge.value == pytest.approx(value, abs=1e-14)
    assert np.allclose(ge.beta, beta, atol=1e-14)


def test_iota_unique_on_random_spectra():
    rng = np.random.default_rng(77)
    for _ in range(10_000):
        k = int(rng.integers(1, 13))
        s = int(rng.integers(1, k + 1))
        lam = np.sort(rng.exponential(size=k) ** rng.uniform(0.5, 3))[::-1]
        tails = np.cumsum(lam[::-1])[::-1]
        hits = [
            i
            for i in range(s)
            if (i == 0 or lam[i - 1] > tails[i] / (s - i)) and tails[i] / (s - i) >= lam[i]
        ]
        assert hits == [compute_iota(lam, s)]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12), st.data())
def test_gamma_dominates_top_logs(vals, data):
    lam = np.sort(np.array(vals))[::-1]
    s = data.draw(st.integers(1, lam.size))
    ge = gamma_s(lam, s)
    tail = lam[ge.iota:].sum() / (s - ge.iota)
    assert (ge.iota == 0 or lam[ge.iota - 1] > tail) and tail >= lam[ge.iota] * (1 - 1e-12)
    assert ge.value >= np.sum(np.log(lam[:s])) - 1e-9
    assert ge.beta @ lam == pytest.approx(s)


def test_iota_domain_signal():
    with pytest.raises(DomainError):
        compute_iota(np.array([1.0, 0.0, 0.0]), 4)


def test_factorize_examples():
    for C in (np.eye(2), C2):
        f = factorize(C)
        assert np.max(np.abs(f.F @ f.F.T - C)) <= 1e-10
    # the repeated eigenvalue of I_2 leaves the column order free
    F = factorize(np.eye(2)).F
    assert np.allclose(np.abs(F.T @ F), np.eye(2))
    assert np.allclose(np.abs(factorize(C2).F), np.sqrt([[1.5, 0.5], [1.5, 0.5]]))
    f = factorize(np.diag([4.0, 0.0]))
    assert f.k == 1 and np.allclose(np.abs(f.F), [[2.0], [0.0]])


def test_value_examples():
    fact = factorize(C2)
    assert eval_f_ddfact([1.0, 0.0], None, fact, 1) == pytest.approx(np.log(2), abs=1e-12)
    assert eval_f_ddfact([0.5, 0.5], None, fact, 1) == pytest.approx(np.log(2), abs=1e-12)


def test_rank_deficient_domain_signal():
    fact = factorize(D234)
    assert eval_f_ddfact([1.0, 0.0, 0.0], None, fact, 2) == -np.inf


def test_uniform_rescaling_invariance(rng):
    for _ in range(20):
        inst = random_instance(rng, 6, 3)
        fact = factorize(inst.C)
        x = interior_point(rng, 6, 3)
        Y = np.exp(rng.uniform(-1, 1, 6))
        base = eval_f_ddfact(x, Y, fact, 3)
        for c in (0.1, 10.0):
            assert abs(eval_f_ddfact(x, c * Y, fact, 3) - base) <= 1e-9


def test_T_examples():
    assert np.allclose(grad_x_ddfact([0.5, 0.5], None, np.eye(2), 1), [1.0, 1.0], atol=1e-14)
    T = grad_x_ddfact([1.0, 0.0], None, factorize(C2), 1)
    assert T[0] == pytest.approx(1.0, abs=1e-12)


def test_grad_logY_zero_at_origin():
    assert np.array_equal(grad_logY_ddfact(np.zeros(3), None, np.eye(3), 1), np.zeros(3))
    assert eval_f_ddfact(np.zeros(3), None, np.eye(3), 1) == -np.inf


def test_derivatives_match_finite_differences(rng):
    checked = 0
    while checked < 10:
        inst = random_instance(rng, 5, 2)
        fact = factorize(inst.C)
        x = interior_point(rng, 5, 2)
        u = rng.uniform(-0.7, 0.7, 5)
        Y = np.exp(u)
        obj = DDFactObjective(fact.F, Y, 2)
        ge, _ = obj.evaluate(x)
        lam = ge.lam
        # skip points near a change of iota or an eigenvalue crossing
        gaps = np.abs(np.diff(lam))
        tails = np.cumsum(lam[::-1])[::-1]
        mean = tails[ge.iota] / (2 - ge.iota)
        if gaps.min() < 1e-3 or abs(mean - lam[ge.iota]) < 1e-3 or (ge.iota and abs(lam[ge.iota - 1] - mean) < 1e-3):
            continue
        checked += 1
        g = grad_x_ddfact(x, Y, fact, 2)
        assert rel_err(g, central_diff(lambda z: eval_f_ddfact(z, Y, fact, 2), x)) <= 1e-5
        gl = grad_logY_ddfact(x, Y, fact, 2)
        assert rel_err(gl, central_diff(lambda v: eval_f_ddfact(x, np.exp(v), fact, 2), u)) <= 1e-5
        H = hessian_x_ddfact(x, Y, fact, 2)
        assert rel_err(H, central_diff(lambda z: grad_x_ddfact(z, Y, fact, 2), x)) <= 1e-5


def test_concavity_in_x(rng):
    inst = random_instance(rng, 7, 3)
    fact = factorize(inst.C)
    Y = np.exp(rng.uniform(-1, 1, 7))
    for _ in range(50):
        a, b = interior_point(rng, 7, 3), interior_point(rng, 7, 3)
        t = rng.uniform()
        mid = eval_f_ddfact(t * a + (1 - t) * b, Y, fact, 3)
        ends = t * eval_f_ddfact(a, Y, fact, 3) + (1 - t) * eval_f_ddfact(b, Y, fact, 3)
        assert mid >= ends - 1e-8


def test_gradient_at_selected_indices(rng):
    worst = -np.inf
    for _ in range(20):
        inst = random_instance(rng, 6, 3)
        fact = factorize(inst.C)
        for S in itertools.combinations(range(6), 3):
            x = np.zeros(6)
            x[list(S)] = 1
            if eval_f_ddfact(x, None, fact, 3) == -np.inf:
                continue
            T = grad_x_ddfact(x, None, fact, 3)
            worst = max(worst, float(np.max(T[list(S)])))
    assert worst <= 1 + 1e-9


def test_stationarity_at_unit_scaling(rng):
    for _ in range(10):
        n = int(rng.integers(5, 10))
        inst = random_instance(rng, n)
        fact = factorize(inst.C)
        rep = solve_ddfact(inst, tol=1e-10)
        g = grad_logY_ddfact(rep.x, None, fact, inst.s)
        assert np.max(np.abs(g)) <= 1e-5


def test_solve_examples(c2, d234):
    assert solve_ddfact(c2).bound == pytest.approx(np.log(2), abs=1e-6)
    assert solve_ddfact(d234).bound >= np.log(12) - 1e-6


def test_o_scaling_invariance(rng):
    inst = random_instance(rng, 7, 3)
    base = solve_ddfact(inst, tol=1e-11).bound
    for gamma in (0.3, 1.0, 5.0):
        assert abs(solve_ddfact(inst, gamma * np.ones(7), tol=1e-11).bound - base) <= 1e-8


def test_validity(rng):
    for _ in range(15):
        n = int(rng.integers(4, 9))
        inst = random_instance(rng, n)
        z = solve_exact(inst).z
        Y = np.exp(rng.uniform(-1, 1, n))
        assert solve_ddfact(inst, Y).bound >= z - 1e-6
        assert solve_ddfact_comp(inst, Y).bound >= z - 1e-6


def test_comp_examples(d234):
    assert solve_ddfact_comp(d234).bound >= np.log(12) - 1e-6
    eye = Instance(np.eye(3), 2)
    assert solve_ddfact_comp(eye).bound >= -1e-6
    assert solve_ddfact(eye).bound >= -1e-6


def test_comp_near_singular_unavailable():
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 4)))[0]
    C = Q @ np.diag([1.0, 0.5, 0.3, 1e-10]) @ Q.T
    rep = solve_ddfact_comp(Instance(C, 2))
    assert rep.status == "unavailable" and rep.bound == np.inf


def test_comp_reports_original_variables(d234):
    rep = solve_ddfact_comp(d234, lower=np.array([1.0, 0.0, 0.0]))
    assert rep.x[0] == pytest.approx(1.0)
    assert rep.x.sum() == pytest.approx(2.0)
