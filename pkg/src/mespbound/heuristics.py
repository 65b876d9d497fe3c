"""Lower bounds: greedy forward selection followed by 1-swap local search."""

import math
from dataclasses import dataclass

import numpy as np

from .constants import LP_FEAS_TOL, SWAP_IMPROVE_TOL
from .errors import DomainError
from .exact import subset_ldet
from .instance import Instance


@dataclass(frozen=True)
class Incumbent:
    S: tuple  # sorted 0-based indices
    value: float
    feasible: bool
    rounds: int = 0

    def indicator(self, n) -> np.ndarray:
        x = np.zeros(n)
        x[list(self.S)] = 1.0
        return x


def make_incumbent(inst: Instance, S, rounds=0) -> Incumbent:
    S = tuple(sorted(int(i) for i in S))
    x = np.zeros(inst.n)
    x[list(S)] = 1.0
    return Incumbent(S, subset_ldet(inst.C, S), inst.feasible(x, LP_FEAS_TOL), rounds)


def _completable(inst, x, pool, need):
    """Greedy attempt to add ``need`` indices from ``pool`` to ``x`` satisfying ``A x <= b``.

    Each step adds the index minimizing the total optimistic violation, where a
    row's optimistic value also counts the cheapest way to fill the remaining slots.
    """
    A, b = inst.A, inst.b
    Ax = A @ x
    pool = list(pool)
    for step in range(need):
        rest = need - step - 1
        best_k, best_v = None, math.inf
        for pos, k in enumerate(pool):
            Axk = Ax + A[:, k]
            if rest:
                others = np.delete(A[:, pool], pos, axis=1)
                opt = np.sort(others, axis=1)[:, :rest].sum(axis=1)
            else:
                opt = 0.0
            v = float(np.maximum(Axk + opt - b, 0.0).sum())
            if v < best_v:
                best_k, best_v = k, v
        if best_k is None:
            return False
        Ax = Ax + A[:, best_k]
        pool.remove(best_k)
    return bool(np.all(Ax <= b + LP_FEAS_TOL))


def greedy_construct(inst: Instance, forced_in=(), forced_out=()):
    """Forward selection maximizing ldet with a feasibility look-ahead.

    Returns an :class:`Incumbent`, or ``None`` when no feasible completion was found.
    """
    n, s, C = inst.n, inst.s, inst.C
    S = []
    x = np.zeros(n)
    resid = np.diag(C).copy()
    L = np.zeros((n, s))
    banned = set(forced_out)

    def add(p):
        t = len(S)
        if resid[p] <= 0:
            return False
        col = (C[:, p] - L[:, :t] @ L[p, :t]) / math.sqrt(resid[p])
        L[:, t] = col
        resid[:] -= col * col
        S.append(p)
        x[p] = 1.0
        return True

    for p in sorted(set(forced_in)):
        if not add(p):
            return None
    tol = 1e-12 * max(float(np.max(np.diag(C))), 1e-300)
    while len(S) < s:
        cand = [j for j in range(n) if j not in banned and x[j] == 0.0]
        cand.sort(key=lambda j: -resid[j])  # stable: ties keep lowest index first
        chosen = None
        for j in cand:
            if resid[j] <= tol:
                break
            if inst.m:
                x[j] = 1.0
                pool = [k for k in cand if k != j]
                ok = _completable(inst, x, pool, s - len(S) - 1)
                x[j] = 0.0
                if not ok:
                    continue
            chosen = j
            break
        if chosen is None:
            return None
        add(chosen)
    inc = make_incumbent(inst, S)
    return inc if inc.feasible and inc.value > -math.inf else None


def local_search(inst: Instance, start: Incumbent, forced_in=(), forced_out=(), max_rounds: int = 10_000) -> Incumbent:
    """Best-improvement 1-swap local search; never returns a worse set than ``start``."""
    if not start.feasible:
        raise DomainError("local search needs a feasible starting set")
    n, C, A, b = inst.n, inst.C, inst.A, inst.b
    locked = set(forced_in)
    banned = set(forced_out)
    cur = start
    for rounds in range(max_rounds):
        S = list(cur.S)
        out = [j for j in range(n) if j not in cur.S and j not in banned]
        movable = [p for p, i in enumerate(S) if i not in locked]
        if not out or not movable or cur.value == -math.inf:
            break
        K = np.linalg.inv(C[np.ix_(S, S)])
        CSo = C[np.ix_(S, out)]
        W = K @ CSo
        q = np.einsum("ij,ij->j", CSo, W)
        kpp = np.diag(K)[movable]
        d = np.diag(C)[out][None, :] - q[None, :] + W[movable, :] ** 2 / kpp[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(d > 0, cur.value + np.log(kpp)[:, None] + np.log(np.maximum(d, 1e-300)), -math.inf)
        if inst.m:
            x = np.zeros(n)
            x[S] = 1.0
            Ax = A @ x
            Sm = [S[p] for p in movable]
            newAx = Ax[:, None, None] - A[:, Sm][:, :, None] + A[:, out][:, None, :]
            ok = np.all(newAx <= b[:, None, None] + LP_FEAS_TOL, axis=0)
            vals = np.where(ok, vals, -math.inf)
        flat = int(np.argmax(vals))
        p, jj = divmod(flat, len(out))
        if not vals[p, jj] > cur.value + SWAP_IMPROVE_TOL:
            break
        newS = [i for i in S if i != S[movable[p]]] + [out[jj]]
        nxt = make_incumbent(inst, newS, rounds + 1)
        if not nxt.value > cur.value + SWAP_IMPROVE_TOL or not nxt.feasible:
            break
        cur = nxt
    return cur


def heuristic_lower_bound(inst: Instance, forced_in=(), forced_out=()):
    """Greedy followed by local search; ``None`` when greedy finds nothing feasible."""
    inc = greedy_construct(inst, forced_in, forced_out)
    if inc is None:
        return None
    return local_search(inst, inc, forced_in, forced_out)
