"""Brute-force CMESP solver by enumerating all s-subsets (desk scale only)."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .constants import ENUM_BUDGET, LP_FEAS_TOL, PD_RTOL, TIE_TOL
from .errors import DomainError
from .instance import Instance

_CHUNK = 20000


@dataclass(frozen=True)
class ExactResult:
    z: float
    optima: list  # sorted 0-based index tuples
    count_feasible: int

    @property
    def feasible(self) -> bool:
        return self.count_feasible > 0

    def fixed_values(self, n):
        """Indices that take the same value in every optimal set: (always_out, always_in)."""
        inside = set(range(n))
        seen = set()
        for S in self.optima:
            inside &= set(S)
            seen |= set(S)
        return set(range(n)) - seen, inside


def subset_ldet(C, S) -> float:
    """ldet C[S,S], or -inf when the submatrix is not positive definite."""
    S = list(S)
    lam = np.linalg.eigvalsh(C[np.ix_(S, S)])
    if lam[-1] <= 0 or lam[0] <= PD_RTOL * lam[-1]:
        return -math.inf
    return float(np.sum(np.log(lam)))


def solve_exact(inst: Instance, budget: int = ENUM_BUDGET, forced_in=(), forced_out=()) -> ExactResult:
    """Enumerate every feasible s-subset and return the optimum with all co-optima.

    ``forced_in`` / ``forced_out`` restrict the enumeration to subsets containing
    / avoiding the given indices.
    """
    n, s = inst.n, inst.s
    forced_in = sorted(set(forced_in))
    forced_out = set(forced_out)
    free = [j for j in range(n) if j not in forced_out and j not in forced_in]
    k = s - len(forced_in)
    total = math.comb(len(free), k) if 0 <= k <= len(free) else 0
    if total > budget:
        raise DomainError(f"C({len(free)},{k}) = {total} subsets exceeds the enumeration budget {budget}")
    best = -math.inf
    values, sets = [], []
    count = 0
    combos = itertools.combinations(free, k) if total else iter(())
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            break
        idx = np.array([sorted(forced_in + list(c)) for c in chunk], dtype=int).reshape(len(chunk), s)
        if inst.m:
            x = np.zeros((len(chunk), n))
            np.put_along_axis(x, idx, 1.0, axis=1)
            ok = np.all(x @ inst.A.T <= inst.b + LP_FEAS_TOL, axis=1)
            idx = idx[ok]
        if not len(idx):
            continue
        count += len(idx)
        subs = inst.C[idx[:, :, None], idx[:, None, :]]
        lam = np.linalg.eigvalsh(subs)
        pd = (lam[:, -1] > 0) & (lam[:, 0] > PD_RTOL * lam[:, -1])
        vals = np.full(len(idx), -math.inf)
        vals[pd] = np.sum(np.log(lam[pd]), axis=1)
        cmax = vals.max()
        if cmax > best:
            best = cmax
        keep = vals >= best - 10 * TIE_TOL
        values.extend(vals[keep])
        sets.extend(tuple(int(i) for i in row) for row in idx[keep])
    optima = sorted(S for S, v in zip(sets, values) if v >= best - TIE_TOL and v > -math.inf)
    return ExactResult(float(best), optima, count)
