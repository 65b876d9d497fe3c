"""Choosing the scaling vector to minimize a bound.

``optimize_g_scaling`` runs BFGS over ``log g`` with Armijo backtracking and
envelope gradients; ``optimize_o_scaling`` runs safeguarded Newton over the
scalar ``t = log gamma`` with ``g = gamma e``.  :func:`solve_bound` combines
the two in the order used for reporting: none, then o, then g started at the
o optimum.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bqp import BqpPoint, eval_f_bqp, grad_logY_bqp, hessian_logY_bqp
from .constants import (
    ARMIJO_C1,
    FW_MAX_ITER,
    FW_TOL,
    G_STEPS_REPORT,
    O_SCALING_DERIV_TOL,
    O_SCALING_MAX_ITER,
    SCALING_INNER_TOL,
)
from .ddfact import DDFactObjective, factorize, solve_ddfact, solve_ddfact_comp
from .errors import DomainError, InputError
from .instance import Instance, ScalingVector, as_scaling, complement
from .linx import LinxObjective, grad_logY_linx, hessian_logY_linx, solve_linx
from .relax import BoundReport, Polytope

METHODS = ("linx", "ddfact", "ddfact_comp")
SCALINGS = ("none", "o", "g")

_MAX_LOG_STEP = 2.0  # cap on a single move in log coordinates
_BACKTRACKS = 20
# o-scaling solves need derivatives far below the default gap tolerance
_O_INNER_TOL = 1e-11


def normalize_method(method: str) -> str:
    m = str(method).lower().replace("-", "_")
    if m not in METHODS:
        raise InputError(f"unknown bound method {method!r}; expected one of linx, ddfact, ddfact-comp")
    return m


def _flip(v):
    return None if v is None else 1.0 - np.asarray(v, dtype=float)


class BoundOracle:
    """Repeated solves of one bound on one instance (optionally with pinned variables) at varying scalings.

    For ``ddfact_comp`` the scaling acts on the complementary instance while
    ``lower``, ``upper`` and every reported ``x`` stay in the original variables.
    Construction raises :class:`DomainError` when the complement is unavailable
    and :class:`InfeasibleError` when the pinned polytope is empty.
    """

    def __init__(self, method, inst: Instance, lower=None, upper=None, tol=FW_TOL, max_iter=FW_MAX_ITER):
        self.method = normalize_method(method)
        self.inst = inst
        self.tol = tol
        self.max_iter = max_iter
        self.lower, self.upper = lower, upper
        self.fact = None
        self.comp = None
        if self.method == "ddfact_comp":
            self.comp = complement(inst)
            cinst = self.comp[0]
            self.poly = Polytope(cinst.n, cinst.s, cinst.A, cinst.b, _flip(upper), _flip(lower))
            self.fact = factorize(cinst.C)
            self.primal_poly = Polytope(inst.n, inst.s, inst.A, inst.b, lower, upper)
        else:
            self.poly = self.primal_poly = Polytope(inst.n, inst.s, inst.A, inst.b, lower, upper)
            if self.method == "ddfact":
                self.fact = factorize(inst.C)

    @property
    def scale_invariant(self) -> bool:
        """DDFact values do not change under ``g -> c g``."""
        return self.method != "linx"

    def solve(self, Y=None, x0=None, tol=None) -> BoundReport:
        Y = as_scaling(Y, self.inst.n)
        tol = self.tol if tol is None else tol
        kw = dict(tol=tol, max_iter=self.max_iter, x0=x0, poly=self.poly)
        if self.method == "linx":
            return solve_linx(self.inst, Y, **kw)
        if self.method == "ddfact":
            return solve_ddfact(self.inst, Y, fact=self.fact, **kw)
        return solve_ddfact_comp(self.inst, Y, comp=self.comp, fact=self.fact, **kw)

    def grad_log(self, rep: BoundReport) -> np.ndarray:
        """Envelope gradient of the bound in ``log g`` at the solved point."""
        Y = rep.scaling
        if self.method == "linx":
            return grad_logY_linx(rep.x, Y, self.inst.C)
        if self.method == "ddfact":
            return DDFactObjective(self.fact.F, Y.gamma, self.inst.s).grad_log_gamma(rep.x)
        cinst = self.comp[0]
        return DDFactObjective(self.fact.F, Y.gamma, cinst.s).grad_log_gamma(1.0 - rep.x)

    def grad_x(self, rep: BoundReport) -> np.ndarray:
        """Gradient of the relaxation objective in the original variables at ``rep.x``."""
        gamma = rep.scaling.gamma
        if self.method == "linx":
            return LinxObjective(self.inst.C, gamma).grad(rep.x)
        if self.method == "ddfact":
            return DDFactObjective(self.fact.F, gamma, self.inst.s).grad(rep.x)
        return -DDFactObjective(self.fact.F, gamma, self.comp[0].s).grad(1.0 - rep.x)

    def hess_log(self, rep: BoundReport):
        """Hessian of the objective in ``log g`` at fixed ``x`` (linx only, else ``None``)."""
        if self.method == "linx":
            return hessian_logY_linx(rep.x, rep.scaling, self.inst.C)
        return None


@dataclass
class ScalingResult:
    Y: ScalingVector
    trace: list  # (iteration, bound, gradient inf-norm)
    best_value: float
    status: str  # converged | budget_exhausted | stalled
    start_value: float = math.nan
    report: BoundReport = None
    extra: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        """The common factor when ``Y`` is uniform."""
        return float(np.exp(np.mean(self.Y.log)))


def _try_solve(oracle, u, x0, tol):
    try:
        rep = oracle.solve(ScalingVector(log=u), x0=x0, tol=tol)
    except (DomainError, FloatingPointError):
        return None
    if not np.isfinite(rep.bound):
        return None
    return rep


def optimize_g_scaling(method, inst: Instance, Y0=None, max_steps=G_STEPS_REPORT, *, tol=SCALING_INNER_TOL,
                       grad_tol=1e-9, oracle=None, lower=None, upper=None) -> ScalingResult:
    """BFGS on ``log g`` minimizing the certified bound.

    Each trial scaling is solved to gap ``tol``, warm-started from the last
    accepted relaxation solution; failed or non-decreasing trials are
    rejected by the Armijo test.  For DDFact variants the log-scaling is
    re-centred to mean zero after every accepted step.
    """
    if oracle is None:
        oracle = BoundOracle(method, inst, lower, upper)
    n = inst.n
    u = np.array(as_scaling(Y0, n).log)
    if oracle.scale_invariant:
        u -= u.mean()
    rep = _try_solve(oracle, u, None, tol)
    if rep is None:
        raise DomainError("bound evaluation failed at the starting scaling")
    g = oracle.grad_log(rep)
    if not np.all(np.isfinite(g)):
        raise DomainError("non-finite scaling gradient at the starting scaling")
    phi0 = phi = rep.bound
    trace = [(0, phi, float(np.max(np.abs(g))))]
    H = None
    status = "budget_exhausted"
    steps = 0
    while steps < max_steps:
        if np.max(np.abs(g)) <= grad_tol:
            status = "converged"
            break
        d = -g if H is None else -(H @ g)
        if g @ d >= 0:
            H, d = None, -g
        alpha = min(1.0, _MAX_LOG_STEP / float(np.max(np.abs(d))))
        slope = float(g @ d)
        new = None
        for _ in range(_BACKTRACKS):
            trial = _try_solve(oracle, u + alpha * d, rep.x, tol)
            if trial is not None and trial.bound <= phi + ARMIJO_C1 * alpha * slope:
                new = trial
                break
            alpha *= 0.5
        if new is None:
            if H is not None:
                H = None  # retry once along steepest descent
                continue
            status = "stalled"
            break
        steps += 1
        g_new = oracle.grad_log(new)
        if not np.all(np.isfinite(g_new)):
            raise DomainError("non-finite scaling gradient")
        sv = alpha * d
        yv = g_new - g
        sy = float(sv @ yv)
        if sy > 1e-12 * np.linalg.norm(sv) * np.linalg.norm(yv):
            if H is None:
                H = (sy / float(yv @ yv)) * np.eye(n)
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(sv, yv)
            H = V @ H @ V.T + rho * np.outer(sv, sv)
        u = u + sv
        if oracle.scale_invariant:
            u -= u.mean()
            new.scaling = ScalingVector(log=u)
        rep, g, phi = new, g_new, new.bound
        trace.append((steps, phi, float(np.max(np.abs(g)))))
    return ScalingResult(ScalingVector(log=u), trace, phi, status, phi0, rep)


def optimize_o_scaling(method, inst: Instance, gamma0=1.0, *, point: BqpPoint = None, tol=_O_INNER_TOL,
                       deriv_tol=O_SCALING_DERIV_TOL, max_iter=O_SCALING_MAX_ITER, oracle=None,
                       lower=None, upper=None) -> ScalingResult:
    """Safeguarded Newton on ``phi(t) = bound(exp(t) e)``.

    ``phi'`` is the sum of the envelope gradient and ``phi''`` is estimated by
    ``e' H e`` at the fixed relaxation solution, raised to the secant slope of
    ``phi'`` when that is larger; steps leaving the current
    bracket, or taken with nonpositive curvature, fall back to bisection or a
    doubling search.  ``method="bqp_pointwise"`` instead minimizes the BQP
    objective at the fixed member ``point`` with exact derivatives.
    """
    n = inst.n
    e = np.ones(n)
    pointwise = str(method).lower().replace("-", "_") == "bqp_pointwise"
    if pointwise:
        if point is None:
            raise InputError("bqp_pointwise o-scaling needs a member point")
    elif oracle is None:
        oracle = BoundOracle(method, inst, lower, upper)

    last = {"rep": None}

    def evaluate(t):
        Y = ScalingVector(log=np.full(n, t))
        if pointwise:
            v = eval_f_bqp(point, Y, inst.C)
            H = hessian_logY_bqp(point, Y, inst.C)
            return v, float(grad_logY_bqp(point, Y, inst.C).sum()), float(e @ H @ e), None
        prev = last["rep"]
        rep = oracle.solve(Y, x0=None if prev is None else prev.x, tol=tol)
        last["rep"] = rep
        g = oracle.grad_log(rep)
        H = oracle.hess_log(rep)
        return rep.bound, float(g.sum()), (float(e @ H @ e) if H is not None else 0.0), rep

    t = math.log(gamma0)
    lo, hi = -math.inf, math.inf
    trace = []
    best = (math.inf, t, None)
    status = "budget_exhausted"
    expand = 1.0
    v0 = None
    prev = None
    for it in range(max_iter):
        v, d1, d2, rep = evaluate(t)
        if not (np.isfinite(v) and np.isfinite(d1) and np.isfinite(d2)):
            raise DomainError(f"non-finite o-scaling derivative at log gamma = {t:.6g}")
        if v0 is None:
            v0 = v
        trace.append((it, v, abs(d1)))
        if v < best[0]:
            best = (v, t, rep)
        if abs(d1) < deriv_tol:
            status = "converged"
            best = (v, t, rep)
            break
        if d1 > 0:
            hi = min(hi, t)
        else:
            lo = max(lo, t)
        if hi - lo <= 1e-15 * max(1.0, abs(t)):
            status = "stalled"
            break
        if prev is not None and t != prev[0]:
            # e'He ignores how x* moves with t and so underestimates the curvature
            d2 = max(d2, (d1 - prev[1]) / (t - prev[0]))
        prev = (t, d1)
        tn = t - d1 / d2 if d2 > 0 else None
        if tn is None or not lo < tn < hi or abs(tn - t) > _MAX_LOG_STEP * expand:
            if math.isfinite(lo) and math.isfinite(hi):
                tn = 0.5 * (lo + hi)
            else:
                tn = t - math.copysign(expand, d1)
                expand *= 2.0
        t = tn
    v, t, rep = best
    return ScalingResult(ScalingVector(log=np.full(n, t)), trace, v, status, v0, rep)


def solve_bound(method, inst: Instance, scaling="none", *, steps=G_STEPS_REPORT, tol=FW_TOL, Y=None,
                lower=None, upper=None) -> BoundReport:
    """Certified bound with the requested scaling mode.

    ``none`` solves at ``Y`` (default all ones); ``o`` optimizes the common
    factor; ``g`` runs ``steps`` BFGS steps from the o optimum.  The
    returned report carries the optimizer results in ``extra``.  A missing
    complement gives an ``unavailable`` report instead of an exception.
    """
    if scaling not in SCALINGS:
        raise InputError(f"unknown scaling mode {scaling!r}; expected none, o or g")
    try:
        oracle = BoundOracle(method, inst, lower, upper, tol=tol)
    except DomainError as exc:
        if normalize_method(method) != "ddfact_comp":
            raise
        return BoundReport(math.inf, math.nan, math.nan, None, as_scaling(Y, inst.n), "ddfact_comp",
                           converged=False, status="unavailable", extra={"reason": str(exc)})
    if scaling == "none":
        return oracle.solve(Y)
    ores = optimize_o_scaling(method, inst, 1.0 if Y is None else float(np.exp(np.mean(as_scaling(Y, inst.n).log))),
                              oracle=oracle)
    if scaling == "o":
        rep = oracle.solve(ores.Y, x0=ores.report.x if ores.report is not None else None)
        rep.extra["o_scaling"] = ores
        return rep
    gres = optimize_g_scaling(method, inst, ores.Y, steps, oracle=oracle)
    rep = gres.report
    if rep.gap > tol:
        rep = oracle.solve(gres.Y, x0=rep.x)
    rep.extra["o_scaling"] = ores
    rep.extra["g_scaling"] = gres
    return rep
