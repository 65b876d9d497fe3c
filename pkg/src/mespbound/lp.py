"""Dense bounded-variable primal simplex (Bland's rule).

Solves ``max c.z  s.t.  M z = r,  lo <= z <= hi`` for small row counts; the
Frank-Wolfe oracle calls it with one cardinality row plus the side constraints.
"""

import numpy as np

from .constants import LP_FEAS_TOL, LP_OPT_TOL
from .errors import DomainError, InfeasibleError

_PIVOT_TOL = 1e-11


class _Tableau:
    def __init__(self, M, r, lo, hi, z, basis):
        self.M = M
        self.r = r
        self.lo = lo
        self.hi = hi
        self.z = z
        self.basis = basis

    def _refresh(self):
        B = self.basis
        Bm = self.M[:, B]
        nonbasic = np.ones(self.M.shape[1], dtype=bool)
        nonbasic[B] = False
        rhs = self.r - self.M[:, nonbasic] @ self.z[nonbasic]
        self.z[B] = np.linalg.solve(Bm, rhs)
        return Bm, nonbasic

    def run(self, c, max_iter):
        M, lo, hi, z = self.M, self.lo, self.hi, self.z
        opt_tol = LP_OPT_TOL * max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        for _ in range(max_iter):
            Bm, nonbasic = self._refresh()
            y = np.linalg.solve(Bm.T, c[self.basis])
            d = c - M.T @ y
            can_up = nonbasic & (z <= lo + LP_FEAS_TOL) & (hi > lo) & (d > opt_tol)
            can_down = nonbasic & (z >= hi - LP_FEAS_TOL) & (hi > lo) & (d < -opt_tol)
            eligible = np.flatnonzero(can_up | can_down)
            if eligible.size == 0:
                return d
            j = int(eligible[0])
            delta = 1.0 if can_up[j] else -1.0
            a = np.linalg.solve(Bm, M[:, j]) * delta
            zB = z[self.basis]
            loB, hiB = lo[self.basis], hi[self.basis]
            limits = np.full(a.size, np.inf)
            dec = a > _PIVOT_TOL
            inc = a < -_PIVOT_TOL
            limits[dec] = np.maximum(zB[dec] - loB[dec], 0.0) / a[dec]
            limits[inc] = np.maximum(hiB[inc] - zB[inc], 0.0) / -a[inc]
            t_own = hi[j] - lo[j]
            t_basic = limits.min() if limits.size else np.inf
            if not np.isfinite(min(t_own, t_basic)):
                raise DomainError("LP is unbounded")
            if t_own <= t_basic:
                z[self.basis] = zB - t_own * a
                z[j] = hi[j] if delta > 0 else lo[j]
                continue
            ties = np.flatnonzero(limits <= t_basic + 1e-14)
            pos = min(ties, key=lambda p: self.basis[p])
            leave = self.basis[pos]
            z[self.basis] = zB - t_basic * a
            z[j] = z[j] + delta * t_basic
            z[leave] = lo[leave] if a[pos] > 0 else hi[leave]
            self.basis[pos] = j
        raise DomainError("simplex iteration limit reached")


def simplex_max(c, M, r, lo, hi, z_start, slack_cols, tie_weights=None, max_iter=None):
    """Maximize ``c.z`` over ``{M z = r, lo <= z <= hi}``.

    ``z_start`` gives nonbasic starting values (each at a finite bound);
    ``slack_cols[k]`` is the column of a unit slack for row ``k`` or ``-1``.
    When ``tie_weights`` is given, the optimal face is re-optimized for it so
    that ties are broken deterministically.

    Returns ``(z, value)``; raises :class:`InfeasibleError` if the set is empty.
    """
    M = np.asarray(M, dtype=float)
    p, N = M.shape
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    z = np.array(z_start, dtype=float)
    if max_iter is None:
        max_iter = 50 * (N + p) + 1000
    resid = r - M @ z
    basis = []
    art_cols = []
    art_sign = []
    for k in range(p):
        sc = slack_cols[k]
        if sc >= 0:
            val = z[sc] + resid[k]  # slack has coefficient +1 in row k
            if lo[sc] - LP_FEAS_TOL <= val <= hi[sc] + LP_FEAS_TOL:
                z[sc] = min(max(val, lo[sc]), hi[sc])
                resid[k] = val - z[sc]
                if abs(resid[k]) <= LP_FEAS_TOL:
                    basis.append(sc)
                    continue
        art_cols.append(k)
        art_sign.append(1.0 if resid[k] >= 0 else -1.0)
        basis.append(None)
    na = len(art_cols)
    if na:
        Art = np.zeros((p, na))
        Art[art_cols, np.arange(na)] = art_sign
        M = np.hstack([M, Art])
        lo = np.concatenate([lo, np.zeros(na)])
        hi = np.concatenate([hi, np.full(na, np.inf)])
        z = np.concatenate([z, np.zeros(na)])
        for t, k in enumerate(art_cols):
            basis[k] = N + t
        tab = _Tableau(M, r, lo, hi, z, basis)
        tab._refresh()
        c1 = np.zeros(N + na)
        c1[N:] = -1.0
        tab.run(c1, max_iter)
        infeas = float(z[N:].sum())
        if infeas > LP_FEAS_TOL * max(1.0, float(np.max(np.abs(r))) if r.size else 1.0):
            raise InfeasibleError(f"polytope is empty (phase-1 residual {infeas:.3e})")
        hi[N:] = 0.0
        z[N:] = np.minimum(z[N:], 0.0)
        c = np.concatenate([c, np.zeros(na)])
    else:
        tab = _Tableau(M, r, lo, hi, z, basis)
        tab._refresh()
        c = np.asarray(c, dtype=float)
    d = tab.run(c, max_iter)
    value = float(c[:N] @ z[:N])
    if tie_weights is not None:
        nonbasic = np.ones(z.size, dtype=bool)
        nonbasic[tab.basis] = False
        opt_tol = LP_OPT_TOL * max(1.0, float(np.max(np.abs(c))))
        pin = nonbasic & (np.abs(d) > opt_tol)
        lo[pin] = z[pin]
        hi[pin] = z[pin]
        w = np.zeros(z.size)
        w[: len(tie_weights)] = tie_weights
        tab.run(w, max_iter)
        value = float(c[:N] @ z[:N])
    return z[:N].copy(), value
