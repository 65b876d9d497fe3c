"""Conditional-gradient maximization over ``{e.x = s, lo <= x <= hi, A x <= b}``.

The solver returns the final iterate together with its Frank-Wolfe gap; for a
concave objective ``value + gap`` is a certified upper bound on the maximum.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .constants import AWAY_TIE_RTOL, FACE_TOL, FW_MAX_ITER, FW_TOL, LP_FEAS_TOL
from .errors import DomainError, InfeasibleError, InputError
from .lp import simplex_max


def _is_binary(v):
    return bool(np.all((v == 0.0) | (v == 1.0)))


class Polytope:
    """``{x : sum(x) = s, lower <= x <= upper, A x <= b}``; nonemptiness is checked on construction."""

    def __init__(self, n, s, A=None, b=None, lower=None, upper=None):
        self.n = int(n)
        self.s = float(s)
        if A is None or np.size(A) == 0:
            A, b = np.zeros((0, self.n)), np.zeros(0)
        self.A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, self.n)
        self.b = np.asarray(b, dtype=float).reshape(-1)
        self.lower = np.zeros(self.n) if lower is None else np.asarray(lower, dtype=float).copy()
        self.upper = np.ones(self.n) if upper is None else np.asarray(upper, dtype=float).copy()
        if self.A.shape[0] != self.b.size:
            raise InputError("A and b have inconsistent shapes")
        if np.any(self.lower > self.upper):
            raise InfeasibleError("lower bound exceeds upper bound")
        m = self.m
        self._M = np.zeros((m + 1, self.n + m))
        self._M[0, : self.n] = 1.0
        self._M[1:, : self.n] = self.A
        self._M[1:, self.n :] = np.eye(m)
        self._r = np.concatenate([[self.s], self.b])
        self._tie = (self.n - np.arange(self.n)) / self.n
        self.lp_oracle(np.zeros(self.n), tie_break=False)  # raises InfeasibleError when empty
        self._interior = None

    @property
    def m(self):
        return self.A.shape[0]

    def pinned(self, lower=None, upper=None) -> "Polytope":
        lo = self.lower if lower is None else lower
        hi = self.upper if upper is None else upper
        return Polytope(self.n, self.s, self.A, self.b, lo, hi)

    def contains(self, x, tol=LP_FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            abs(x.sum() - self.s) <= tol
            and np.all(x >= self.lower - tol)
            and np.all(x <= self.upper + tol)
            and np.all(self.A @ x <= self.b + tol)
        )

    # -------------------------------------------------------------- LP oracle

    def _top_k(self, c, lo, hi):
        x = lo.copy()
        free = np.flatnonzero(hi > lo)
        k = int(round(self.s - lo.sum()))
        if k < 0 or k > free.size:
            raise InfeasibleError("cardinality incompatible with the variable bounds")
        order = free[np.argsort(-c[free], kind="stable")]
        x[order[:k]] = hi[order[:k]]
        return x

    def lp_oracle(self, c, tie_break=True, lower=None, upper=None, tight=None):
        """A vertex maximizing ``c.x``.

        ``lower``/``upper`` override the variable bounds and ``tight`` marks side
        constraints to hold with equality (used for minimal-face queries).  With
        ``tie_break`` the returned vertex is the one on the optimal face that
        prefers lower indices, matching the fast path without side constraints.
        """
        c = np.asarray(c, dtype=float)
        lo = self.lower if lower is None else lower
        hi = self.upper if upper is None else upper
        binary = _is_binary(lo) and _is_binary(hi)
        if self.m == 0 and binary:
            return self._top_k(c, lo, hi)
        m = self.m
        slack_hi = np.full(m, np.inf)
        if tight is not None:
            slack_hi[np.asarray(tight, dtype=bool)] = 0.0
        zlo = np.concatenate([lo, np.zeros(m)])
        zhi = np.concatenate([hi, slack_hi])
        try:
            start = self._top_k(c, lo, hi) if binary else lo.copy()
        except InfeasibleError:
            start = lo.copy()
        z0 = np.concatenate([start, np.zeros(m)])
        cz = np.concatenate([c, np.zeros(m)])
        slack_cols = [-1] + [self.n + k for k in range(m)]
        x, _ = simplex_max(cz, self._M, self._r, zlo, zhi, z0, slack_cols, self._tie if tie_break else None)
        return x[: self.n]

    # ----------------------------------------------------------- geometry

    def face_bounds(self, x):
        """Bounds and tight-row mask describing the minimal face containing ``x``."""
        lo, hi = self.lower.copy(), self.upper.copy()
        at_lo = x <= self.lower + FACE_TOL
        at_hi = x >= self.upper - FACE_TOL
        hi[at_lo] = self.lower[at_lo]
        lo[at_hi] = self.upper[at_hi]
        tight = self.b - self.A @ x <= FACE_TOL * (1.0 + np.abs(self.b))
        return lo, hi, tight

    def max_step(self, x, d, rows=None):
        """Largest ``t >= 0`` with ``x + t d`` feasible (bounds and, optionally, a subset of rows)."""
        t = np.inf
        pos, neg = d > 1e-15, d < -1e-15
        if pos.any():
            t = min(t, float(np.min((self.upper[pos] - x[pos]) / d[pos])))
        if neg.any():
            t = min(t, float(np.min((x[neg] - self.lower[neg]) / -d[neg])))
        if self.m:
            Ad = self.A @ d
            sel = Ad > 1e-15
            if rows is not None:
                sel &= rows
            if sel.any():
                slack = self.b - self.A @ x
                t = min(t, float(np.min(np.maximum(slack[sel], 0.0) / Ad[sel])))
        return max(t, 0.0)

    def interior_point(self):
        """A relative-interior point: a balanced fill, else the average of coordinate-extreme vertices."""
        if self._interior is not None:
            return self._interior.copy()
        lo, hi = self.lower, self.upper
        free = hi > lo
        x = lo.copy()
        if free.any():
            x[free] += (self.s - lo.sum()) / free.sum()
        if not (self.contains(x) and np.all(self.A @ x < self.b - 1e-9)):
            verts = []
            for j in np.flatnonzero(free):
                e = np.zeros(self.n)
                e[j] = 1.0
                verts.append(self.lp_oracle(e, tie_break=False))
                verts.append(self.lp_oracle(-e, tie_break=False))
            if not verts:
                verts.append(self.lp_oracle(np.zeros(self.n)))
            x = np.mean(verts, axis=0)
        self._interior = x
        return x.copy()

    def snap(self, x):
        """Put near-bound coordinates exactly on the bound, keeping sum(x) = s."""
        x = np.clip(x, self.lower, self.upper)
        x[np.abs(x - self.lower) <= FACE_TOL] = self.lower[np.abs(x - self.lower) <= FACE_TOL]
        x[np.abs(x - self.upper) <= FACE_TOL] = self.upper[np.abs(x - self.upper) <= FACE_TOL]
        free = (x > self.lower) & (x < self.upper)
        r = self.s - x.sum()
        if free.any() and r != 0.0:
            y = x.copy()
            y[free] += r / free.sum()
            if np.all(y[free] >= self.lower[free]) and np.all(y[free] <= self.upper[free]):
                x = y
        return x


@dataclass
class SolveReport:
    x: np.ndarray
    value: float
    gap: float
    iterations: int
    converged: bool

    @property
    def upper(self) -> float:
        return self.value + self.gap


@dataclass
class BoundReport:
    """Certified upper bound on the CMESP optimum from one relaxation solve."""

    bound: float
    value: float
    gap: float
    x: np.ndarray
    scaling: object
    method: str
    iterations: int = 0
    converged: bool = True
    seconds: float = 0.0
    offset: float = 0.0
    status: str = "ok"
    extra: dict = field(default_factory=dict)


def _line_search(f, grad, x, d, tmax, fx, slope, max_eval=60):
    """Maximize the concave 1-D restriction ``t -> f(x + t d)`` on ``[0, tmax]``.

    Uses the directional derivative (nonincreasing by concavity) with a
    safeguarded secant/bisection; points outside the domain count as having
    derivative ``-inf``.  Returns ``(t, f(x + t d))`` with ``f >= fx``.
    """
    best_t, best_f = 0.0, fx
    lo, dlo = 0.0, slope
    hi, dhi = tmax, None
    side = 0
    for k in range(max_eval):
        if k == 0:
            t = tmax
        elif dhi is None or not np.isfinite(dhi):
            t = 0.5 * (lo + hi)
        else:
            t = lo + dlo * (hi - lo) / (dlo - dhi)
            w = hi - lo
            t = min(max(t, lo + 1e-3 * w), hi - 1e-3 * w)
        y = x + t * d
        ft = f(y)
        if not np.isfinite(ft):
            hi, dhi = t, -np.inf
            continue
        dt = float(grad(y) @ d)
        if ft > best_f:
            best_t, best_f = t, ft
        if k == 0 and dt >= 0:
            break
        if abs(dt) <= 1e-13 * max(abs(slope), 1e-300) or hi - lo <= 1e-15 * max(tmax, 1e-300):
            break
        if dt > 0:
            lo, dlo = t, dt
            if side == 1 and dhi is not None and np.isfinite(dhi):
                dhi *= 0.5  # Illinois modification
            side = 1
        else:
            hi, dhi = t, dt
            if side == -1:
                dlo *= 0.5
            side = -1
    if best_t == 0.0 and lo > 0.0:
        # ascent along [0, lo] is certified by the derivative sign even when the
        # change in f is below rounding
        best_t, best_f = lo, f(x + lo * d)
    return best_t, best_f


def _not_worse(fy, fx):
    return fy >= fx - 1e-14 * max(abs(fx), 1.0)


def _newton_face_step(poly, f, grad, hess, x, fx, g):
    lo_f, hi_f, tight = poly.face_bounds(x)
    J = np.flatnonzero(hi_f > lo_f)
    if J.size < 2:
        return x, fx
    E = np.vstack([np.ones(J.size), poly.A[tight][:, J]])
    Z = scipy.linalg.null_space(E)
    if Z.shape[1] == 0:
        return x, fx
    H = hess(x, J)
    Hr = Z.T @ H @ Z
    gr = Z.T @ g[J]
    if not np.all(np.isfinite(Hr)):
        return x, fx
    w, U = np.linalg.eigh(0.5 * (Hr + Hr.T))
    scale = max(float(np.max(np.abs(w))), 1e-300)
    w = np.minimum(w, -1e-10 * scale)
    p = -U @ ((U.T @ gr) / w)
    d = np.zeros_like(x)
    d[J] = Z @ p
    slope = float(g @ d)
    if not slope > 0:
        return x, fx
    tmax = poly.max_step(x, d, rows=~tight)
    if tmax <= 0:
        return x, fx
    if tmax >= 1.0:
        y = x + d
        fy = f(y)
        if np.isfinite(fy) and _not_worse(fy, fx):
            y = poly.snap(y)
            return y, f(y)
        tmax = 1.0
    t, ft = _line_search(f, grad, x, d, tmax, fx, slope)
    if t <= 0:
        return x, fx
    y = poly.snap(x + t * d)
    fy = f(y)
    return (y, fy) if _not_worse(fy, fx) else (x, fx)


def maximize(poly: Polytope, f, grad, x0=None, tol=FW_TOL, max_iter=FW_MAX_ITER, hess=None) -> SolveReport:
    """Away-step Frank-Wolfe for a concave ``f`` over ``poly``.

    ``f(x)`` returns ``-inf`` outside its domain.  When ``hess(x, J)`` (the
    Hessian block on index set ``J``) is supplied, each iteration also takes a
    Newton step restricted to the current face, which gives fast local
    convergence; the Frank-Wolfe gap remains the stopping test and certificate.
    """
    x = poly.interior_point() if x0 is None else poly.snap(np.asarray(x0, dtype=float))
    fx = f(x)
    if not np.isfinite(fx) and x0 is not None:
        x = poly.interior_point()
        fx = f(x)
    if not np.isfinite(fx):
        raise DomainError("objective undefined at the starting point")
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        v = poly.lp_oracle(g, tie_break=False)
        gap = max(float(g @ (v - x)), 0.0)
        if gap <= tol:
            return SolveReport(x, fx, gap, it - 1, True)
        d_fw = v - x
        lo_f, hi_f, tight = poly.face_bounds(x)
        d, tmax = d_fw, 1.0
        try:
            va = poly.lp_oracle(-g, tie_break=False, lower=lo_f, upper=hi_f, tight=tight)
            d_a = x - va
            # near-ties go to the Frank-Wolfe vertex
            if g @ d_a > g @ d_fw + AWAY_TIE_RTOL * max(abs(gap), 1.0):
                amax = poly.max_step(x, d_a)
                if amax > 0:
                    d, tmax = d_a, amax
        except (InfeasibleError, DomainError):
            pass
        slope = float(g @ d)
        t, ft = _line_search(f, grad, x, d, tmax, fx, slope)
        moved = t > 0
        if moved:
            y = poly.snap(x + t * d)
            fy = f(y)
            if _not_worse(fy, fx):
                x, fx = y, fy
            else:
                moved = False
        if hess is not None:
            x_new, f_new = _newton_face_step(poly, f, grad, hess, x, fx, grad(x))
            moved = moved or x_new is not x
            x, fx = x_new, f_new
        if not moved:
            break
    g = grad(x)
    v = poly.lp_oracle(g, tie_break=False)
    gap = max(float(g @ (v - x)), 0.0)
    return SolveReport(x, fx, gap, it, gap <= tol)
