"""Pointwise evaluation of the g-scaled BQP bound.

Over the lifted set ``P(n, s)`` of pairs ``(x, X)``::

    F(x, X; g) = (Diag(g) C Diag(g)) o X + Diag(1 - x)
    f(x, X; g) = ldet F - 2 sum_i x_i log g_i

Maximizing ``f`` over ``P(n, s)`` needs a semidefinite solver and is not done
here.  This module checks membership, evaluates ``f`` and its derivatives in
``log g``, and builds member points for verification.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .instance import as_scaling

MEMBER_PSD_TOL = 1e-8
MEMBER_DIAG_TOL = 1e-9
MEMBER_SUM_TOL = 1e-9
MEMBER_ROW_TOL = 1e-8
MEMBER_AX_TOL = 1e-9


@dataclass(frozen=True)
class BqpPoint:
    x: np.ndarray
    X: np.ndarray
    family: str = "given"

    @classmethod
    def lift(cls, x):
        """The integer lift ``(x, x x^T)``."""
        x = np.asarray(x, dtype=float)
        return cls(x, np.outer(x, x), "lift")


def check_membership(p: BqpPoint, n, s, A=None, b=None):
    """Violated conditions of ``P(n, s)`` (plus ``A x <= b``) as ``(name, residual)`` pairs."""
    x = np.asarray(p.x, dtype=float)
    X = np.asarray(p.X, dtype=float)
    if x.shape != (n,) or X.shape != (n, n):
        raise ValueError(f"point shapes {x.shape}, {X.shape} do not match n={n}")
    out = []
    S = X - np.outer(x, x)
    lam_min = float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])
    if lam_min < -MEMBER_PSD_TOL:
        out.append(("X - xx' psd", -lam_min))
    r = float(np.max(np.abs(np.diag(X) - x)))
    if r > MEMBER_DIAG_TOL:
        out.append(("diag X = x", r))
    r = abs(float(x.sum()) - s)
    if r > MEMBER_SUM_TOL:
        out.append(("e'x = s", r))
    r = float(np.max(np.abs(X.sum(axis=1) - s * x)))
    if r > MEMBER_ROW_TOL:
        out.append(("Xe = sx", r))
    if A is not None and np.size(A):
        r = float(np.max(np.asarray(A) @ x - np.asarray(b)))
        if r > MEMBER_AX_TOL:
            out.append(("Ax <= b", r))
    return out


def _parts(p, Y, C):
    C = np.asarray(C, dtype=float)
    g = as_scaling(Y, C.shape[0])
    x = np.asarray(p.x, dtype=float)
    Acore = (g.gamma[:, None] * C * g.gamma[None, :]) * np.asarray(p.X, dtype=float)
    F = Acore + np.diag(1.0 - x)
    return x, g, Acore, F


def _finv(F):
    cf = linalg.chol_or_none(F)
    if cf is None:
        return None, None
    return cf, scipy.linalg.cho_solve(cf, np.eye(F.shape[0]), check_finite=False)


def eval_f_bqp(p: BqpPoint, Y, C) -> float:
    """Objective value; ``-inf`` where ``F`` is not positive definite."""
    x, g, _, F = _parts(p, Y, C)
    cf = linalg.chol_or_none(F)
    if cf is None:
        return -np.inf
    return linalg.chol_logdet(cf) - 2.0 * float(x @ g.log)


def grad_logY_bqp(p: BqpPoint, Y, C) -> np.ndarray:
    """``2 (diag(A F^-1) - x)`` with ``A = (Diag(g) C Diag(g)) o X``; equals ``2 (1-x)(1 - diag F^-1)``."""
    x, _, _, F = _parts(p, Y, C)
    _, Finv = _finv(F)
    if Finv is None:
        return np.full(x.size, np.nan)
    return 2.0 * (1.0 - x) * (1.0 - np.diag(Finv))


def hessian_logY_bqp(p: BqpPoint, Y, C) -> np.ndarray:
    """``4 G o (I - G)`` with ``G = D F^-1 D`` and ``D = Diag(1-x)^(1/2)``; positive semidefinite."""
    x, _, _, F = _parts(p, Y, C)
    _, Finv = _finv(F)
    if Finv is None:
        return np.full((x.size, x.size), np.nan)
    d = np.sqrt(np.clip(1.0 - x, 0.0, None))
    G = d[:, None] * Finv * d[None, :]
    G = 0.5 * (G + G.T)
    return 4.0 * (np.diag(np.diag(G)) - G * G)


def hessian_logY_bqp_factored(p: BqpPoint, Y, C) -> np.ndarray:
    """The product form ``4 (E + I)^-1 o (E^-1 + I)^-1`` with ``E = D^-1 A D^-1``.

    Needs ``x < 1`` and ``A`` positive definite; used to cross-check
    :func:`hessian_logY_bqp`.
    """
    x, _, Acore, _ = _parts(p, Y, C)
    dinv = 1.0 / np.sqrt(1.0 - x)
    E = dinv[:, None] * Acore * dinv[None, :]
    I = np.eye(x.size)
    P1 = linalg.solve_pd(E + I, I)
    P2 = linalg.solve_pd(linalg.solve_pd(E, I) + I, I)
    return 4.0 * P1 * P2


def random_member_points(rng, n, s, count, A=None, b=None, max_lifts=None):
    """Member points of ``P(n, s)``: random convex combinations of feasible integer lifts.

    When ``s == 1`` every other sample is taken from the diagonal family
    ``X = Diag(x)``, which lies in ``P(n, 1)`` for any ``x`` on the simplex.
    Each point records its family.
    """
    if max_lifts is None:
        max_lifts = 2 * n
    pts = []
    for t in range(count):
        if s == 1 and t % 2 == 1 and (A is None or not np.size(A)):
            x = rng.dirichlet(np.ones(n))
            pts.append(BqpPoint(x, np.diag(x), "diagonal"))
            continue
        k = int(rng.integers(1, max_lifts + 1))
        w = rng.dirichlet(np.ones(k))
        x = np.zeros(n)
        X = np.zeros((n, n))
        drawn = 0
        while drawn < k:
            v = np.zeros(n)
            v[rng.choice(n, size=s, replace=False)] = 1.0
            if A is not None and np.size(A) and np.any(np.asarray(A) @ v > np.asarray(b) + MEMBER_AX_TOL):
                continue
            x += w[drawn] * v
            X += w[drawn] * np.outer(v, v)
            drawn += 1
        pts.append(BqpPoint(x, X, "lifts"))
    return pts
