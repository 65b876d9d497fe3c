"""Command-line interface.

Exit codes: 0 on success, 2 for input errors (bad flags, unreadable files,
invalid instances), 3 for numerical failures.
"""

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bqp import BqpPoint, check_membership, eval_f_bqp, grad_logY_bqp, hessian_logY_bqp
from .constants import ENUM_BUDGET, FW_TOL, G_STEPS_REPORT
from .errors import DomainError, InputError
from .exact import solve_exact
from .fixing import iterate_fixing
from .heuristics import heuristic_lower_bound
from .instance import (
    Instance,
    ScalingVector,
    gen_side_constraints,
    load_instance,
    random_instance,
    read_constraints,
    read_matrix,
    read_numbers,
    write_matrix,
)
from .scaling import METHODS, SCALINGS, normalize_method, solve_bound

CSV_HEADER = ["n", "s", "method", "scaling", "ub", "lb", "gap", "ratio", "iters", "wall_ms", "seed", "error"]
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

BQP_UNSUPPORTED = "BQP solve unsupported; use bqp-eval"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _method_arg(text):
    t = text.lower().replace("-", "_")
    if t == "bqp":
        return t
    return normalize_method(t)


def _s_range(text):
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError:
        raise InputError(f"--s-range expects LO:HI, got {text!r}") from None
    if lo > hi:
        raise InputError("--s-range: LO exceeds HI")
    return range(lo, hi + 1)


def _load(args, s=None):
    """Load the instance named by the flags; an invalid matrix is an input error."""
    try:
        return load_instance(args.matrix, args.s if s is None else s, args.constraints)
    except DomainError as exc:
        raise InputError(f"{args.matrix}: {exc}") from None


def _constraints(args, n):
    if not args.constraints:
        return None
    A, b = read_constraints(args.constraints)
    if A.shape[1] != n:
        raise InputError(f"{args.constraints}: constraint width {A.shape[1]} != matrix order {n}")
    return A, b


def _csv_list(text, allowed, conv=lambda t: t):
    items = [conv(t.strip()) for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in allowed]
    if bad or not items:
        raise InputError(f"invalid list {text!r}; choose from {', '.join(allowed)}")
    return items


# ------------------------------------------------------------------- bound


def _bound_text(rep, out):
    out.write(f"method      {rep.method}\n")
    out.write(f"status      {rep.status}\n")
    out.write(f"upper_bound {float(rep.bound)!r}\n")
    out.write(f"value       {float(rep.value)!r}\n")
    out.write(f"gap         {float(rep.gap)!r}\n")
    out.write(f"iterations  {rep.iterations}\n")
    out.write(f"converged   {rep.converged}\n")
    out.write(f"seconds     {rep.seconds:.3f}\n")
    if rep.scaling is not None:
        out.write("log_scaling " + " ".join(repr(float(v)) for v in rep.scaling.log) + "\n")
    if rep.x is not None:
        out.write("x           " + " ".join(repr(float(v)) for v in rep.x) + "\n")


def cmd_bound(args, out):
    if args.method == "bqp":
        raise InputError(BQP_UNSUPPORTED)
    inst = _load(args)
    t0 = time.perf_counter()
    rep = solve_bound(args.method, inst, args.scaling, steps=args.scaling_steps, tol=args.tol)
    wall = (time.perf_counter() - t0) * 1000.0
    if args.out == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow([inst.n, inst.s, rep.method, args.scaling, _fmt(rep.bound), "", "", "", rep.iterations,
                    f"{wall:.0f}", _fmt(args.seed), "" if rep.status == "ok" else rep.status])
    else:
        _bound_text(rep, out)
    return EXIT_OK


# ------------------------------------------------------------- exact/heur


def cmd_exact(args, out):
    inst = _load(args)
    res = solve_exact(inst, budget=args.budget)
    if not res.feasible:
        out.write("infeasible\n")
        return EXIT_OK
    out.write(f"z        {float(res.z)!r}\n")
    out.write(f"feasible {res.count_feasible}\n")
    for S in res.optima:
        out.write("optimum  " + " ".join(str(i + 1) for i in S) + "\n")
    return EXIT_OK


def cmd_heuristic(args, out):
    inst = _load(args)
    inc = heuristic_lower_bound(inst)
    if inc is None:
        out.write("no feasible solution found\n")
        return EXIT_NUMERIC
    out.write(f"value  {float(inc.value)!r}\n")
    out.write(f"rounds {inc.rounds}\n")
    out.write("set    " + " ".join(str(i + 1) for i in inc.S) + "\n")
    return EXIT_OK


# -------------------------------------------------------------------- fix


def cmd_fix(args, out):
    methods = _csv_list(args.methods, METHODS, _method_arg)
    s_values = _s_range(args.s_range) if args.s_range else [args.s]
    if s_values == [None]:
        raise InputError("give --s or --s-range")
    C = read_matrix(args.matrix)
    A, b = _constraints(args, C.shape[0]) or (None, None)
    solved = with_fix = total = 0
    for s in s_values:
        try:
            inst = Instance(C, s, A, b)
        except DomainError as exc:
            raise InputError(f"{args.matrix}: {exc}") from None
        res = iterate_fixing(inst, None, args.mode, args.rounds, methods=methods, g_steps=args.scaling_steps)
        solved += res.status == "decided"
        with_fix += res.count > 0
        total += res.count
        out.write(f"s={s} lb={float(res.lb)!r} rounds={res.rounds} status={res.status}\n")
        out.write("  fix0 " + " ".join(str(i + 1) for i in res.fix0) + "\n")
        out.write("  fix1 " + " ".join(str(i + 1) for i in res.fix1) + "\n")
    if args.s_range:
        out.write(f"instances {len(s_values)}  solved {solved}  inst_fix {with_fix}  var_fix {total}\n")
    return EXIT_OK


# ------------------------------------------------------------- experiment


@dataclass
class ExperimentRow:
    n: int
    s: int
    method: str
    scaling: str
    ub: float = math.nan
    lb: float = math.nan
    gap: float = math.nan
    ratio: float = math.nan
    iters: int = 0
    wall_ms: float = math.nan
    seed: int = None
    error: str = ""

    def cells(self, deterministic=False):
        wall = "" if deterministic or math.isnan(self.wall_ms) else f"{self.wall_ms:.0f}"
        return [self.n, self.s, self.method, self.scaling, _fmt(self.ub), _fmt(self.lb), _fmt(self.gap),
                _fmt(self.ratio), self.iters, wall, _fmt(self.seed), self.error]


def _iteration_count(rep, scaling):
    key = {"o": "o_scaling", "g": "g_scaling"}.get(scaling)
    if key and key in rep.extra:
        return len(rep.extra[key].trace) - 1
    return rep.iterations


def _run_row(task):
    inst, method, scaling, steps, tol, lb, seed = task
    row = ExperimentRow(inst.n, inst.s, method, scaling, lb=lb, seed=seed)
    t0 = time.perf_counter()
    try:
        rep = solve_bound(method, inst, scaling, steps=steps, tol=tol)
        row.ub = rep.bound
        row.iters = _iteration_count(rep, scaling)
        if rep.status != "ok":
            row.error = rep.status
        elif not math.isnan(lb):
            row.gap = rep.bound - lb
    except (DomainError, InputError) as exc:
        row.error = type(exc).__name__ + ": " + str(exc).replace(",", ";")
    row.wall_ms = (time.perf_counter() - t0) * 1000.0
    return row


def build_experiment(C, s_values, constraints=None, gen_m=0, seed=0):
    """Instances and lower bounds per ``s``; all randomness comes from one generator seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    built = []
    for s in s_values:
        try:
            if constraints is not None:
                inst = Instance(C, s, *constraints)
            else:
                inst = Instance(C, s)
                if gen_m:
                    best = heuristic_lower_bound(inst)
                    if best is None:
                        raise DomainError("no MESP solution to cut off")
                    inst = gen_side_constraints(inst, gen_m, rng, best.indicator(inst.n),
                                                check=lambda cand: heuristic_lower_bound(cand) is not None)
            inc = heuristic_lower_bound(inst)
            built.append((s, inst, inc.value if inc is not None else math.nan,
                          "" if inc is not None else "no feasible solution found"))
        except (DomainError, InputError) as exc:
            built.append((s, None, math.nan, type(exc).__name__ + ": " + str(exc).replace(",", ";")))
    return built


def run_experiment(C, s_values, methods, scalings, *, constraints=None, gen_m=0, seed=0, steps=G_STEPS_REPORT,
                   tol=FW_TOL, jobs=1):
    """Rows in (s, method, scaling) order; ratios compare each g row with the o row of the same method."""
    built = build_experiment(C, s_values, constraints, gen_m, seed)
    n = C.shape[0]
    tasks, slots = [], []
    rows = []
    for s, inst, lb, err in built:
        for method in methods:
            for scaling in scalings:
                if inst is None:
                    rows.append(ExperimentRow(n, s, method, scaling, seed=seed, error=err))
                    continue
                slots.append(len(rows))
                rows.append(None)
                tasks.append((inst, method, scaling, steps, tol, lb, seed))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_row, tasks))
    else:
        done = [_run_row(t) for t in tasks]
    for k, row in zip(slots, done):
        rows[k] = row
    for s, inst, lb, err in built:
        if err and inst is not None:
            for r in rows:
                if r.s == s and not r.error:
                    r.error = err
    by_key = {(r.s, r.method, r.scaling): r for r in rows}
    for r in rows:
        o = by_key.get((r.s, r.method, "o"))
        if r.scaling == "g" and o is not None and o.gap > 0 and not math.isnan(r.gap):
            r.ratio = (o.gap - r.gap) / o.gap
    return rows


def write_rows(rows, out, deterministic=False):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells(deterministic))


def cmd_experiment(args, out):
    methods = _csv_list(args.methods, METHODS, _method_arg)
    scalings = _csv_list(args.scalings, SCALINGS)
    C = read_matrix(args.matrix)
    if args.constraints and args.gen_constraints:
        raise InputError("give either --constraints or --gen-constraints, not both")
    constraints = _constraints(args, C.shape[0])
    rows = run_experiment(C, _s_range(args.s_range), methods, scalings, constraints=constraints,
                          gen_m=args.gen_constraints or 0, seed=args.seed, steps=args.scaling_steps,
                          tol=args.tol, jobs=args.jobs)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_rows(rows, fh, args.deterministic)
    else:
        write_rows(rows, out, args.deterministic)
    return EXIT_OK


# --------------------------------------------------------------- bqp-eval


def read_point(path, n):
    """A point file holds ``x`` (n numbers) followed by ``X`` (n*n numbers, row-major)."""
    vals = read_numbers(path)
    if vals.size != n + n * n:
        raise InputError(f"{path}: expected {n + n * n} numbers for n={n}, found {vals.size}")
    x = vals[:n]
    X = vals[n:].reshape(n, n)
    return BqpPoint(x, 0.5 * (X + X.T))


def cmd_bqp_eval(args, out):
    C = read_matrix(args.matrix)
    n = C.shape[0]
    p = read_point(args.point, n)
    if args.log_scaling:
        vals = read_numbers(args.log_scaling)
        if vals.size != n:
            raise InputError(f"{args.log_scaling}: expected {n} log-scaling values")
        Y = ScalingVector(log=vals)
    else:
        Y = ScalingVector.uniform(n, args.gamma)
    A, b = _constraints(args, n) or (None, None)
    viol = check_membership(p, n, args.s, A, b)
    for name, r in viol:
        out.write(f"violated    {name} (residual {r:.3e})\n")
    out.write(f"member      {not viol}\n")
    out.write(f"value       {float(eval_f_bqp(p, Y, C))!r}\n")
    g = grad_logY_bqp(p, Y, C)
    out.write("grad_log    " + " ".join(repr(float(v)) for v in g) + "\n")
    H = hessian_logY_bqp(p, Y, C)
    lam = float(np.linalg.eigvalsh(H)[0]) if np.all(np.isfinite(H)) else math.nan
    out.write(f"hess_min_eig {float(lam)!r}\n")
    return EXIT_OK


# ------------------------------------------------------------- gen-matrix


def cmd_gen_matrix(args, out):
    inst = random_instance(np.random.default_rng(args.seed), args.n, s=1, rank=args.rank)
    write_matrix(args.output, inst.C)
    out.write(f"wrote {args.output} (n={args.n})\n")
    return EXIT_OK


# ----------------------------------------------------------------- parser


def _instance_flags(p, need_s=True):
    p.add_argument("--matrix", required=True, help="covariance matrix file")
    p.add_argument("--s", type=int, required=need_s, help="cardinality")
    p.add_argument("--constraints", help="side-constraint file")


def build_parser():
    parser = _Parser(prog="mespbound", description="Bounds, heuristics and variable fixing for constrained MESP.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bound", help="certified upper bound")
    _instance_flags(p)
    p.add_argument("--method", type=_method_arg, required=True, help="linx, ddfact or ddfact-comp")
    p.add_argument("--scaling", choices=SCALINGS, default="none")
    p.add_argument("--scaling-steps", type=int, default=G_STEPS_REPORT)
    p.add_argument("--tol", type=float, default=FW_TOL)
    p.add_argument("--out", choices=("text", "csv"), default="text")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("exact", help="optimum by enumeration")
    _instance_flags(p)
    p.add_argument("--budget", type=int, default=ENUM_BUDGET)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("heuristic", help="greedy plus local-search lower bound")
    _instance_flags(p)
    p.set_defaults(func=cmd_heuristic)

    p = sub.add_parser("fix", help="variable fixing by probing")
    _instance_flags(p, need_s=False)
    p.add_argument("--s-range", help="LO:HI, reports aggregate counts")
    p.add_argument("--mode", choices=("o", "g"), default="o")
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--methods", default="linx,ddfact,ddfact-comp")
    p.add_argument("--scaling-steps", type=int, default=10)
    p.set_defaults(func=cmd_fix)

    p = sub.add_parser("experiment", help="CSV of bounds and gaps over a range of s")
    p.add_argument("--matrix", required=True)
    p.add_argument("--constraints")
    p.add_argument("--gen-constraints", type=int, metavar="M", help="add M random side constraints per s")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s-range", required=True)
    p.add_argument("--methods", default="linx,ddfact,ddfact-comp")
    p.add_argument("--scalings", default="none,o,g")
    p.add_argument("--scaling-steps", type=int, default=G_STEPS_REPORT)
    p.add_argument("--tol", type=float, default=FW_TOL)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--deterministic", action="store_true", help="leave wall_ms empty for byte-identical output")
    p.add_argument("--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bqp-eval", help="evaluate the BQP objective at a lifted point")
    _instance_flags(p)
    p.add_argument("--point", required=True, help="file with x then X")
    p.add_argument("--gamma", type=float, default=1.0, help="uniform scaling factor")
    p.add_argument("--log-scaling", help="file with n log-scaling values")
    p.set_defaults(func=cmd_bqp_eval)

    p = sub.add_parser("gen-matrix", help="write a random positive definite matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_gen_matrix)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except InputError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except DomainError as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

