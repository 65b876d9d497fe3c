"""Certified upper bounds, heuristics and variable fixing for the constrained
maximum-entropy sampling problem."""

from .bqp import BqpPoint, check_membership, eval_f_bqp, grad_logY_bqp, hessian_logY_bqp
from .ddfact import (
    Factorization,
    GammaEval,
    compute_iota,
    eval_f_ddfact,
    factorize,
    gamma_s,
    grad_logY_ddfact,
    grad_x_ddfact,
    solve_ddfact,
    solve_ddfact_comp,
)
from .errors import DomainError, InfeasibleError, InputError
from .exact import ExactResult, solve_exact
from .fixing import FixResult, iterate_fixing, probe_fix
from .heuristics import Incumbent, greedy_construct, heuristic_lower_bound, local_search
from .instance import (
    Instance,
    ScalingVector,
    complement,
    gen_side_constraints,
    load_instance,
    random_instance,
)
from .linalg import EigDecomp, eig_sym, ldet_pd, solve_pd
from .linx import eval_f_linx, grad_logY_linx, grad_x_linx, hessian_logY_linx, solve_linx
from .relax import BoundReport, Polytope, SolveReport, maximize
from .scaling import ScalingResult, optimize_g_scaling, optimize_o_scaling, solve_bound

__version__ = "0.1.0"
