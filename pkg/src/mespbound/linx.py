"""Generalized-scaled linx bound.

For a scaling vector ``g > 0`` and ``x in [0,1]^n``::

    F(x; g) = Diag(g) C Diag(x) C Diag(g) + Diag(1 - x)
    f(x; g) = 1/2 ldet F(x; g) - sum_i x_i log g_i

``f`` is concave in ``x``; its maximum over the CMESP polytope bounds the
optimum for every ``g``, and that maximum is convex in ``log g``.
"""

import time

import numpy as np
import scipy.linalg

from . import linalg
from .constants import FW_MAX_ITER, FW_TOL
from .instance import Instance, as_scaling
from .relax import BoundReport, Polytope, maximize


class LinxObjective:
    """``f``, its x-gradient and x-Hessian at fixed scaling, sharing one factorization per point."""

    def __init__(self, C, gamma):
        gamma = np.asarray(gamma, dtype=float)
        self.B = gamma[:, None] * np.asarray(C, dtype=float)  # column i is Diag(g) C e_i
        self.log_gamma = np.log(gamma)
        self.n = self.B.shape[0]
        self._key = None
        self._state = None

    def _at(self, x):
        key = x.tobytes()
        if key != self._key:
            F = (self.B * x) @ self.B.T + np.diag(1.0 - x)
            cf = linalg.chol_or_none(F)
            if cf is None:
                state = None
            else:
                Finv = scipy.linalg.cho_solve(cf, np.eye(self.n), check_finite=False)
                state = (0.5 * linalg.chol_logdet(cf) - x @ self.log_gamma, Finv)
            self._key, self._state = key, state
        return self._state

    def value(self, x):
        st = self._at(x)
        return -np.inf if st is None else st[0]

    def finv(self, x):
        st = self._at(x)
        return None if st is None else st[1]

    def grad(self, x):
        st = self._at(x)
        if st is None:
            return np.full(self.n, np.nan)
        Finv = st[1]
        quad = np.einsum("ki,kl,li->i", self.B, Finv, self.B)
        return 0.5 * (quad - np.diag(Finv)) - self.log_gamma

    def hess(self, x, J=None):
        st = self._at(x)
        Finv = st[1]
        R = self.B.T @ Finv  # R[i, j] = b_i' F^-1 e_j
        P = R @ self.B
        H = -0.5 * (P * P - R * R - R.T * R.T + Finv * Finv)
        if J is not None:
            H = H[np.ix_(J, J)]
        return H


def _objective(x, Y, C):
    C = np.asarray(C, dtype=float)
    return LinxObjective(C, as_scaling(Y, C.shape[0]).gamma), np.asarray(x, dtype=float)


def eval_f_linx(x, Y, C) -> float:
    """Objective value, or ``-inf`` where ``F(x; g)`` is not positive definite."""
    obj, x = _objective(x, Y, C)
    return obj.value(x)


def grad_x_linx(x, Y, C) -> np.ndarray:
    obj, x = _objective(x, Y, C)
    return obj.grad(x)


def _finv_or_nan(x, Y, C):
    obj, x = _objective(x, Y, C)
    return obj.finv(x), x


def grad_logY_linx(x, Y, C) -> np.ndarray:
    """Partial derivatives of ``f`` in ``log g``: ``diag(A F^-1) - x`` with ``A = F - Diag(1-x)``.

    Since ``A F^-1 = I - Diag(1-x) F^-1`` this equals ``(1-x) * (1 - diag F^-1)``.
    """
    Finv, x = _finv_or_nan(x, Y, C)
    if Finv is None:
        return np.full(x.size, np.nan)
    return (1.0 - x) * (1.0 - np.diag(Finv))


def hessian_logY_linx(x, Y, C) -> np.ndarray:
    """Hessian of ``f`` in ``log g``: ``2 G o (I - G)`` with ``G = D F^-1 D``, ``D = Diag(1-x)^(1/2)``.

    Positive semidefinite; well defined on all of ``[0,1]^n`` because ``D`` only
    needs the square root of ``1 - x``.
    """
    Finv, x = _finv_or_nan(x, Y, C)
    if Finv is None:
        return np.full((x.size, x.size), np.nan)
    d = np.sqrt(np.clip(1.0 - x, 0.0, None))
    G = d[:, None] * Finv * d[None, :]
    G = 0.5 * (G + G.T)
    return 2.0 * (np.diag(np.diag(G)) - G * G)


def solve_linx(inst: Instance, Y=None, *, tol=FW_TOL, max_iter=FW_MAX_ITER, x0=None,
               lower=None, upper=None, poly=None) -> BoundReport:
    """Certified linx bound ``value + gap`` for ``inst`` at scaling ``Y``."""
    Y = as_scaling(Y, inst.n)
    t0 = time.perf_counter()
    if poly is None:
        poly = Polytope(inst.n, inst.s, inst.A, inst.b, lower, upper)
    obj = LinxObjective(inst.C, Y.gamma)
    rep = maximize(poly, obj.value, obj.grad, x0=x0, tol=tol, max_iter=max_iter, hess=obj.hess)
    return BoundReport(
        bound=rep.upper,
        value=rep.value,
        gap=rep.gap,
        x=rep.x,
        scaling=Y,
        method="linx",
        iterations=rep.iterations,
        converged=rep.converged,
        seconds=time.perf_counter() - t0,
    )
