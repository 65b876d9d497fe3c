"""Numerical tolerances shared by every module."""

# linear algebra
JACOBI_OFFDIAG_RTOL = 1e-12  # off-diagonal Frobenius norm vs ||M||_F
PD_RTOL = 1e-12  # lambda_min > PD_RTOL * lambda_1 for ldet_pd / solve_pd

# instances
PSD_CLIP_RTOL = 1e-8  # eigenvalues in [-PSD_CLIP_RTOL * lambda_1, 0) are clipped
RANK_RTOL = 1e-9  # eigenvalues above RANK_RTOL * lambda_1 count toward rank
INVERTIBLE_RTOL = 1e-9  # complementation requires lambda_min > INVERTIBLE_RTOL * lambda_1

# exact oracle
ENUM_BUDGET = 2_000_000
TIE_TOL = 1e-9

# heuristics
SWAP_IMPROVE_TOL = 1e-10

# LP / polytope
LP_FEAS_TOL = 1e-9
LP_OPT_TOL = 1e-10
FACE_TOL = 1e-12  # a coordinate this close to a bound is treated as on it

# Frank-Wolfe
FW_TOL = 1e-6
FW_MAX_ITER = 2000
AWAY_TIE_RTOL = 1e-12  # away steps must beat the Frank-Wolfe slope by this much

# DDFact domain guard: lambda_s(M) must exceed this times lambda_1(M)
DDFACT_RANK_RTOL = 1e-12

# scaling optimization
SCALING_INNER_TOL = 1e-8
O_SCALING_DERIV_TOL = 1e-10
O_SCALING_MAX_ITER = 100
G_STEPS_FIXING = 10
G_STEPS_REPORT = 50
ARMIJO_C1 = 1e-4

# fixing
FIX_MARGIN = 1e-9
PROBE_GAP_TOL = 1e-6
