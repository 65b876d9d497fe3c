"""Generalized-scaled factorization (DDFact) bound.

With ``C = F F^T`` (``F`` is ``n x k``) and scaling ``g > 0``::

    M(x; g) = sum_i g_i x_i F_i^T F_i = F^T Diag(g * x) F
    f(x; g) = Gamma_s(M(x; g)) - sum_i x_i log g_i

where ``Gamma_s`` applies ``phi_s`` to the eigenvalues: the sum of the logs of
the ``iota`` largest plus ``(s - iota)`` times the log of the mean of the rest.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .constants import DDFACT_RANK_RTOL, FW_MAX_ITER, FW_TOL, RANK_RTOL
from .errors import DomainError
from .instance import Instance, as_scaling, complement
from .relax import BoundReport, Polytope, maximize


@dataclass(frozen=True)
class GammaEval:
    iota: int
    value: float
    beta: np.ndarray
    lam: np.ndarray
    Q: np.ndarray = None


@dataclass(frozen=True)
class Factorization:
    F: np.ndarray
    rank: int

    @property
    def k(self):
        return self.F.shape[1]


def compute_iota(lam, s) -> int:
    """The unique ``iota`` in ``[0, s)`` with ``lam[iota-1] > tail_mean >= lam[iota]`` (``lam[-1] = inf``).

    ``lam`` is sorted descending and indexed from 0 here, so the tail for a
    candidate ``iota`` is ``lam[iota:]`` and its mean is taken over ``s - iota``.
    """
    lam = np.asarray(lam, dtype=float)
    k = lam.size
    if not 0 < s <= k:
        raise DomainError(f"need 0 < s <= k (s={s}, k={k})")
    tails = np.cumsum(lam[::-1])[::-1]
    for rel in (0.0, 1e-12):
        for iota in range(s):
            tail = tails[iota]
            if tail <= 0:
                raise DomainError("spectrum has fewer than s positive eigenvalues")
            mean = tail / (s - iota)
            above = iota == 0 or lam[iota - 1] > mean * (1 - rel)
            if above and mean >= lam[iota] * (1 - rel):
                return iota
    raise DomainError("no index satisfies the sandwich condition")


def gamma_s(lam, s, Q=None) -> GammaEval:
    """``phi_s(lam)`` with its gradient spectrum ``beta`` (reciprocals up to ``iota``, then a constant)."""
    lam = np.asarray(lam, dtype=float)
    iota = compute_iota(lam, s)
    tail = float(lam[iota:].sum())
    top = lam[:iota]
    if np.any(top <= 0):
        raise DomainError("nonpositive eigenvalue among the leading ones")
    value = float(np.sum(np.log(top))) + (s - iota) * math.log(tail / (s - iota))
    beta = np.empty_like(lam)
    beta[:iota] = 1.0 / top
    beta[iota:] = (s - iota) / tail
    return GammaEval(iota, value, beta, lam, Q)


def factorize(C) -> Factorization:
    """``F = Q_r Diag(sqrt(lam_r))`` over the eigenvalues above ``RANK_RTOL * lam_1``."""
    C = np.asarray(C, dtype=float)
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    w, V = w[::-1], V[:, ::-1]
    r = int(np.sum(w > RANK_RTOL * w[0]))
    F = V[:, :r] * np.sqrt(w[:r])
    return Factorization(F, r)


class DDFactObjective:
    """Value, x-gradient and x-Hessian of ``f(x; g)`` for fixed factor and scaling."""

    def __init__(self, F, gamma, s):
        self.F = np.asarray(F, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.log_gamma = np.log(self.gamma)
        self.s = int(s)
        self.n = self.F.shape[0]
        self._key = None
        self._state = None

    def evaluate(self, x):
        """``(GammaEval, value)`` at ``x``, or ``None`` outside the domain."""
        key = x.tobytes()
        if key != self._key:
            M = self.F.T @ ((self.gamma * x)[:, None] * self.F)
            w, Q = np.linalg.eigh(0.5 * (M + M.T))
            w, Q = np.maximum(w[::-1], 0.0), Q[:, ::-1]
            state = None
            if w.size >= self.s and w[0] > 0 and w[self.s - 1] > DDFACT_RANK_RTOL * w[0]:
                ge = gamma_s(w, self.s, Q)
                state = (ge, ge.value - x @ self.log_gamma)
            self._key, self._state = key, state
        return self._state

    def value(self, x):
        st = self.evaluate(x)
        return -np.inf if st is None else st[1]

    def _row_quad(self, x):
        ge = self.evaluate(x)[0]
        FQ = self.F @ ge.Q
        return ge, FQ, (FQ * FQ) @ ge.beta  # F_i Q Diag(beta) Q^T F_i^T

    def grad(self, x):
        if self.evaluate(x) is None:
            return np.full(self.n, np.nan)
        _, _, quad = self._row_quad(x)
        return self.gamma * quad - self.log_gamma

    def grad_log_gamma(self, x):
        if self.evaluate(x) is None:
            # components with x_i = 0 carry no weight even off the domain
            return np.where(x == 0, 0.0, np.nan)
        _, _, quad = self._row_quad(x)
        return x * (self.gamma * quad - 1.0)

    def hess(self, x, J=None):
        """Hessian in ``x`` from the second derivative of the spectral function ``Gamma_s``."""
        ge, FQ, _ = self._row_quad(x)
        if J is None:
            J = np.arange(self.n)
        W = np.sqrt(self.gamma[J])[:, None] * FQ[J]
        lam, beta, iota, s = ge.lam, ge.beta, ge.iota, self.s
        k = lam.size
        tail = float(lam[iota:].sum())
        d2 = np.zeros((k, k))
        d2[np.arange(iota), np.arange(iota)] = -1.0 / lam[:iota] ** 2
        d2[iota:, iota:] = -(s - iota) / tail**2
        W2 = W * W
        H = W2 @ d2 @ W2.T
        dl = lam[:, None] - lam[None, :]
        db = beta[:, None] - beta[None, :]
        # divided differences of beta; equal leading eigenvalues use the limit -1/lam^2
        top = np.arange(k) < iota
        tie = np.abs(dl) <= 1e-12 * lam[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            omega = np.where(tie, 0.0, db / dl)
            omega = np.where(tie & top[:, None] & top[None, :], -1.0 / (lam[:, None] * lam[None, :]), omega)
        np.fill_diagonal(omega, 0.0)
        for l in range(k):
            P = W * W[:, l : l + 1]
            H += (P * omega[l]) @ P.T
        return 0.5 * (H + H.T)


def _as_factor(fact_or_C):
    if isinstance(fact_or_C, Factorization):
        return fact_or_C.F
    return np.asarray(fact_or_C, dtype=float)


def eval_f_ddfact(x, Y, fact, s) -> float:
    """Objective value; ``-inf`` when ``M(x; g)`` has rank below ``s``."""
    F = _as_factor(fact)
    return DDFactObjective(F, as_scaling(Y, F.shape[0]).gamma, s).value(np.asarray(x, dtype=float))


def grad_x_ddfact(x, Y, fact, s) -> np.ndarray:
    """``T(x; g)_i = g_i F_i Q Diag(beta) Q^T F_i^T - log g_i``."""
    F = _as_factor(fact)
    return DDFactObjective(F, as_scaling(Y, F.shape[0]).gamma, s).grad(np.asarray(x, dtype=float))


def grad_logY_ddfact(x, Y, fact, s) -> np.ndarray:
    """``x_i (g_i F_i Q Diag(beta) Q^T F_i^T - 1)``, the partial derivatives in ``log g``."""
    F = _as_factor(fact)
    return DDFactObjective(F, as_scaling(Y, F.shape[0]).gamma, s).grad_log_gamma(np.asarray(x, dtype=float))


def hessian_x_ddfact(x, Y, fact, s) -> np.ndarray:
    F = _as_factor(fact)
    return DDFactObjective(F, as_scaling(Y, F.shape[0]).gamma, s).hess(np.asarray(x, dtype=float))


def solve_ddfact(inst: Instance, Y=None, *, tol=FW_TOL, max_iter=FW_MAX_ITER, x0=None,
                 lower=None, upper=None, poly=None, fact=None) -> BoundReport:
    """Certified DDFact bound ``value + gap`` for ``inst`` at scaling ``Y``."""
    Y = as_scaling(Y, inst.n)
    t0 = time.perf_counter()
    if fact is None:
        fact = factorize(inst.C)
    if poly is None:
        poly = Polytope(inst.n, inst.s, inst.A, inst.b, lower, upper)
    obj = DDFactObjective(fact.F, Y.gamma, inst.s)
    rep = maximize(poly, obj.value, obj.grad, x0=x0, tol=tol, max_iter=max_iter, hess=obj.hess)
    return BoundReport(
        bound=rep.upper,
        value=rep.value,
        gap=rep.gap,
        x=rep.x,
        scaling=Y,
        method="ddfact",
        iterations=rep.iterations,
        converged=rep.converged,
        seconds=time.perf_counter() - t0,
    )


def _flip(v):
    return None if v is None else 1.0 - np.asarray(v, dtype=float)


def solve_ddfact_comp(inst: Instance, Y_comp=None, *, tol=FW_TOL, max_iter=FW_MAX_ITER, x0=None,
                      lower=None, upper=None, comp=None, poly=None, fact=None) -> BoundReport:
    """DDFact on the complementary instance, shifted by ``ldet C``.

    ``x0``, ``lower``, ``upper`` and the returned ``x`` refer to the original
    variables (the complement uses ``1 - x``); a prebuilt ``poly`` or ``fact``
    must already describe the complementary instance.  A numerically singular ``C``
    yields an ``unavailable`` report with an infinite bound.
    """
    t0 = time.perf_counter()
    Y_comp = as_scaling(Y_comp, inst.n)
    if comp is None:
        try:
            comp = complement(inst)
        except DomainError as exc:
            return BoundReport(math.inf, math.nan, math.nan, None, Y_comp, "ddfact_comp",
                               converged=False, status="unavailable", extra={"reason": str(exc)})
    cinst, offset = comp
    rep = solve_ddfact(cinst, Y_comp, tol=tol, max_iter=max_iter, x0=_flip(x0),
                       lower=_flip(upper), upper=_flip(lower), poly=poly, fact=fact)
    rep.method = "ddfact_comp"
    rep.offset = offset
    rep.bound += offset
    rep.value += offset
    rep.x = 1.0 - rep.x
    rep.seconds = time.perf_counter() - t0
    return rep

