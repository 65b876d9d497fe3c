import numpy as np
import pytest

from mespbound.errors import DomainError, InputError
from mespbound.linalg import eig_sym, jacobi_eigh, ldet_pd, solve_pd, sym


def _check_decomp(ed, M):
    lam, Q = ed.values, ed.vectors
    assert np.all(np.diff(lam) <= 0)
    assert np.max(np.abs(Q.T @ Q - np.eye(len(lam)))) <= 1e-10
    assert np.max(np.abs(Q @ np.diag(lam) @ Q.T - M)) <= 1e-8 * (1 + np.max(np.abs(M)))


@pytest.mark.parametrize("eig", [eig_sym, jacobi_eigh])
def test_identity(eig):
    ed = eig(np.eye(2))
    assert np.allclose(ed.values, [1, 1])
    _check_decomp(ed, np.eye(2))


@pytest.mark.parametrize("eig", [eig_sym, jacobi_eigh])
def test_two_by_two(eig):
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    ed = eig(M)
    assert np.allclose(ed.values, [3, 1], atol=1e-14)
    q = ed.vectors[:, 0] * np.sign(ed.vectors[0, 0])
    assert np.allclose(q, np.array([1, 1]) / np.sqrt(2), atol=1e-12)
    q = ed.vectors[:, 1] * np.sign(ed.vectors[0, 1])
    assert np.allclose(q, np.array([1, -1]) / np.sqrt(2), atol=1e-12)


@pytest.mark.parametrize("eig", [eig_sym, jacobi_eigh])
def test_diagonal(eig):
    ed = eig(np.diag([4.0, 3.0, 0.1]))
    assert np.max(np.abs(ed.values - [4, 3, 0.1])) <= 1e-12
    assert np.allclose(np.abs(ed.vectors), np.eye(3))


@pytest.mark.parametrize("n", [1, 5, 20, 50])
def test_reconstruction_random(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        G = rng.standard_normal((n, n))
        M = G + G.T
        _check_decomp(eig_sym(M), M)
        ej = jacobi_eigh(M)
        _check_decomp(ej, M)
        assert np.allclose(ej.values, eig_sym(M).values, atol=1e-9 * (1 + np.abs(M).max()))


def test_diagonal_eigenvalues_sorted_exactly(rng):
    d = rng.uniform(-5, 5, size=12)
    assert np.max(np.abs(eig_sym(np.diag(d)).values - np.sort(d)[::-1])) <= 1e-12


def test_eig_deterministic(rng):
    G = rng.standard_normal((8, 8))
    M = G + G.T
    a, b = eig_sym(M), eig_sym(M)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.vectors, b.vectors)


def test_non_finite_rejected():
    with pytest.raises(InputError):
        eig_sym(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InputError):
        sym(np.ones((2, 3)))


def test_ldet_examples():
    assert ldet_pd(np.eye(3)) == 0.0
    assert ldet_pd(np.array([[4.0, 2.0], [2.0, 2.0]])) == pytest.approx(np.log(4), abs=1e-12)
    assert ldet_pd(np.diag([2.0, 3.0, 4.0])) == pytest.approx(np.log(24), abs=1e-12)


def test_ldet_rejects_indefinite():
    with pytest.raises(DomainError) as info:
        ldet_pd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert info.value.lambda_min == pytest.approx(-1.0)


def test_ldet_additivity(rng):
    for _ in range(10):
        G = rng.standard_normal((6, 6))
        M = G @ G.T + 0.1 * np.eye(6)
        a = rng.uniform(0.2, 3.0, size=6)
        lhs = ldet_pd(a[:, None] * M * a[None, :])
        assert lhs == pytest.approx(ldet_pd(M) + 2 * np.log(a).sum(), abs=1e-9)


def test_solve_examples():
    B = np.arange(6.0).reshape(3, 2)
    assert np.allclose(solve_pd(np.eye(3), B), B)
    inv = solve_pd(np.array([[4.0, 2.0], [2.0, 2.0]]), np.eye(2))
    assert np.allclose(inv, [[0.5, -0.5], [-0.5, 1.0]], atol=1e-14)
    assert np.allclose(solve_pd(np.diag([2.0, 4.0]), np.ones(2)), [0.5, 0.25])


def test_solve_residual(rng):
    G = rng.standard_normal((10, 10))
    M = G @ G.T + np.eye(10)
    B = rng.standard_normal((10, 3))
    X = solve_pd(M, B)
    assert np.max(np.abs(M @ X - B)) <= 1e-8 * (1 + np.max(np.abs(B)))


def test_solve_singular():
    with pytest.raises(DomainError):
        solve_pd(np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))
