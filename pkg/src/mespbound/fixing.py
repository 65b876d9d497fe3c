"""Variable fixing by probing.

Pinning ``x_j = 1`` and obtaining a certified bound below a known lower bound
proves that no optimal set contains ``j`` (``j`` is fixed to 0); pinning
``x_j = 0`` likewise fixes ``j`` to 1.  Before each re-solve a linearization
screen is tried: for a concave objective, ``f(x*) + max g.(y - x*)`` over the
pinned polytope is itself a valid bound and costs one LP.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import FIX_MARGIN, FW_TOL, G_STEPS_FIXING, PROBE_GAP_TOL
from .errors import DomainError, InfeasibleError
from .heuristics import heuristic_lower_bound
from .instance import Instance, ScalingVector, as_scaling
from .scaling import METHODS, BoundOracle, normalize_method, optimize_g_scaling, optimize_o_scaling


@dataclass(frozen=True)
class ProbeRecord:
    index: int
    pin: int  # the value x_j was pinned to; pin 1 refuted means fixed to 0
    method: str
    bound: float
    margin: float  # lb - bound; positive means refuted
    kind: str  # screen | probe | infeasible


@dataclass
class FixResult:
    fix0: tuple
    fix1: tuple
    lb: float
    probes: list = field(default_factory=list)
    rounds: int = 0
    incumbent: tuple = None
    status: str = "ok"

    @property
    def count(self) -> int:
        return len(self.fix0) + len(self.fix1)


def _pins(n, lower, upper):
    lo = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).copy()
    hi = np.ones(n) if upper is None else np.asarray(upper, dtype=float).copy()
    return lo, hi


def _scalings(Y, n):
    if isinstance(Y, (list, tuple)):
        return [as_scaling(y, n) for y in Y]
    return [as_scaling(Y, n)]


def probe_fix(inst: Instance, lb, method, Y=None, *, lower=None, upper=None, tol=FW_TOL, oracle=None,
              candidates=None) -> FixResult:
    """Fix what one bound family can refute at the given scaling(s).

    ``Y`` may be one scaling or a list of them; a pin is refuted when any of
    them gives a certified bound below ``lb - FIX_MARGIN``.  Indices refer to
    ``inst``; already pinned variables are skipped.
    """
    method = normalize_method(method)
    n = inst.n
    lo, hi = _pins(n, lower, upper)
    result = FixResult((), (), lb)
    if not math.isfinite(lb):
        return result
    scalings = _scalings(Y, n)
    if oracle is None:
        oracle = BoundOracle(method, inst, lo, hi, tol=tol)
    poly = oracle.primal_poly
    lines = []
    for Ys in scalings:
        try:
            rep = oracle.solve(Ys)
        except DomainError:
            continue
        g = oracle.grad_x(rep)
        if np.all(np.isfinite(g)):
            lines.append((rep.value - float(g @ rep.x), g))
    threshold = lb - FIX_MARGIN
    fix0, fix1 = [], []
    free = np.flatnonzero(hi > lo) if candidates is None else [j for j in candidates if hi[j] > lo[j]]
    for j in free:
        for pin in (1, 0):
            plo, phi = lo.copy(), hi.copy()
            plo[j] = phi[j] = float(pin)
            record = _refute(inst, oracle, poly, lines, scalings, method, j, pin, plo, phi, threshold, lb, tol)
            if record is None:
                continue
            result.probes.append(record)
            if record.margin > FIX_MARGIN or record.kind == "infeasible":
                (fix0 if pin == 1 else fix1).append(int(j))
                break
    result.fix0, result.fix1 = tuple(sorted(fix0)), tuple(sorted(fix1))
    return result


def _refute(inst, oracle, poly, lines, scalings, method, j, pin, plo, phi, threshold, lb, tol):
    best = math.inf
    for const, g in lines:
        try:
            v = poly.lp_oracle(g, tie_break=False, lower=plo, upper=phi)
        except InfeasibleError:
            return ProbeRecord(int(j), pin, method, -math.inf, math.inf, "infeasible")
        best = min(best, const + float(g @ v))
    if best < threshold:
        return ProbeRecord(int(j), pin, method, best, lb - best, "screen")
    try:
        probe = BoundOracle(method, inst, plo, phi, tol=tol)
    except InfeasibleError:
        return ProbeRecord(int(j), pin, method, -math.inf, math.inf, "infeasible")
    for Ys in scalings:
        try:
            rep = probe.solve(Ys)
        except DomainError:
            continue
        if rep.gap <= PROBE_GAP_TOL:
            best = min(best, rep.bound)
        if best < threshold:
            break
    if not math.isfinite(best):
        return None
    return ProbeRecord(int(j), pin, method, best, lb - best, "probe")


def _contract(inst: Instance, keep):
    keep = np.asarray(keep)
    A = inst.A[:, keep] if inst.m else None
    return Instance(inst.C[np.ix_(keep, keep)], inst.s, A, inst.b if inst.m else None)


def _scale_for(method, inst, oracle, mode, g_steps):
    """Scalings to probe with: the o optimum, plus the g result in g mode."""
    ores = optimize_o_scaling(method, inst, oracle=oracle)
    out = [ores.Y]
    if mode == "g":
        gres = optimize_g_scaling(method, inst, ores.Y, g_steps, oracle=oracle)
        out.append(gres.Y)
    return out


def iterate_fixing(inst: Instance, lb=None, scaling_mode="o", budget=20, *, methods=METHODS,
                   g_steps=G_STEPS_FIXING, tol=FW_TOL) -> FixResult:
    """Rounds of probing with each bound family until a round fixes nothing.

    Variables fixed to 0 are deleted from the instance; variables fixed to 1
    stay pinned.  The lower bound starts at ``lb`` (a heuristic value when
    omitted) and is raised by re-running the heuristic on each contracted
    instance.  Returned indices refer to ``inst``.
    """
    if scaling_mode not in ("o", "g"):
        raise ValueError("scaling_mode must be 'o' or 'g'")
    methods = [normalize_method(m) for m in methods]
    idx = np.arange(inst.n)
    cur = inst
    lo, hi = np.zeros(inst.n), np.ones(inst.n)
    fix0, fix1 = [], []
    probes = []
    incumbent = None
    if lb is None:
        inc = heuristic_lower_bound(inst)
        lb = inc.value if inc is not None else -math.inf
        incumbent = inc.S if inc is not None else None
    status = "ok"
    rounds = 0

    def decided():
        return len(fix1) == inst.s or inst.n - len(fix0) == inst.s

    while rounds < budget and not decided():
        rounds += 1
        changed = False
        for method in methods:
            if decided():
                break
            try:
                oracle = BoundOracle(method, cur, lo, hi, tol=tol)
                Ys = _scale_for(method, cur, oracle, scaling_mode, g_steps)
            except DomainError:
                continue  # e.g. complement unavailable on a singular matrix
            res = probe_fix(cur, lb, method, Ys, lower=lo, upper=hi, tol=tol, oracle=oracle)
            probes.extend(
                ProbeRecord(int(idx[p.index]), p.pin, p.method, p.bound, p.margin, p.kind) for p in res.probes
            )
            if not (res.fix0 or res.fix1):
                continue
            changed = True
            fix1.extend(int(idx[j]) for j in res.fix1)
            lo[list(res.fix1)] = 1.0
            fix0.extend(int(idx[j]) for j in res.fix0)
            keep = np.setdiff1d(np.arange(cur.n), res.fix0)
            if decided():
                break
            try:
                nxt = _contract(cur, keep)
            except DomainError:
                status = "contraction_failed"
                break
            if nxt.rank < nxt.s:
                status = "contraction_failed"
                break
            cur, idx, lo, hi = nxt, idx[keep], lo[keep], hi[keep]
            forced = [int(j) for j in np.flatnonzero(lo == 1.0)]
            inc = heuristic_lower_bound(cur, forced_in=forced)
            if inc is not None and inc.value > lb:
                lb = inc.value
                incumbent = tuple(sorted(int(idx[j]) for j in inc.S))
        if status != "ok" or not changed:
            break
    if decided():
        status = "decided"
        rest = sorted(set(range(inst.n)) - set(fix0) - set(fix1))
        if len(fix1) == inst.s:
            fix0.extend(rest)
        else:
            fix1.extend(rest)
    return FixResult(tuple(sorted(fix0)), tuple(sorted(fix1)), lb, probes, rounds, incumbent, status)
