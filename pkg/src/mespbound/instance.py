"""Problem data: covariance matrix, cardinality and optional side constraints."""

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .constants import INVERTIBLE_RTOL, PSD_CLIP_RTOL, RANK_RTOL
from .errors import DomainError, InputError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Instance:
    """A CMESP instance ``max ldet C[S,S] : |S| = s, A x_S <= b``.

    ``A`` has shape ``(m, n)`` and ``b`` shape ``(m,)``; ``m = 0`` means plain MESP.
    Construction symmetrizes ``C``, clips tiny negative eigenvalues and checks
    ``0 < s < n`` and ``rank(C) >= s``.
    """

    C: np.ndarray
    s: int
    A: np.ndarray = None
    b: np.ndarray = None
    eig: linalg.EigDecomp = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        C = linalg.sym(self.C)
        n = C.shape[0]
        s = self.s
        if isinstance(s, float) and s.is_integer():
            s = int(s)
        if not isinstance(s, (int, np.integer)) or not 0 < s < n:
            raise InputError(f"cardinality s={self.s} must satisfy 0 < s < n={n}")
        ed = linalg.eig_sym(C)
        lam = ed.values
        lmax = max(lam[0], 0.0)
        if lam[-1] < 0:
            if lam[-1] < -PSD_CLIP_RTOL * lmax:
                raise DomainError(f"matrix is not PSD (lambda_min={lam[-1]:.3e})", lambda_min=float(lam[-1]))
            log.warning("clipping negative eigenvalues down to %.3e", lam[-1])
            lam = np.maximum(lam, 0.0)
            C = linalg.sym(ed.vectors @ np.diag(lam) @ ed.vectors.T)
            ed = linalg.EigDecomp(lam, ed.vectors)
        rank = int(np.sum(lam > RANK_RTOL * lmax)) if lmax > 0 else 0
        if rank < s:
            raise DomainError(f"rank(C)={rank} is smaller than s={s}")
        A, b = self.A, self.b
        if A is None or np.size(A) == 0:
            A = np.zeros((0, n))
            b = np.zeros(0)
        else:
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape[1] != n or b.shape != (A.shape[0],):
                raise InputError(f"constraint shapes A{A.shape}, b{b.shape} do not match n={n}")
        for arr in (C, A, b):
            arr.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "s", int(s))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "eig", ed)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def rank(self) -> int:
        lam = self.eig.values
        return int(np.sum(lam > RANK_RTOL * lam[0]))

    def feasible(self, x, tol=1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x <= self.b + tol))

    def with_constraints(self, A, b) -> "Instance":
        return Instance(self.C, self.s, A, b)


class ScalingVector:
    """Strictly positive scaling vector, viewed either directly or in log coordinates."""

    __slots__ = ("_log",)

    def __init__(self, gamma=None, *, log=None):
        if (gamma is None) == (log is None):
            raise InputError("give exactly one of gamma or log")
        if log is None:
            gamma = np.asarray(gamma, dtype=float)
            if gamma.ndim != 1 or not np.all(gamma > 0) or not np.all(np.isfinite(gamma)):
                raise InputError("scaling vector must be finite and strictly positive")
            log = np.log(gamma)
        log = np.array(log, dtype=float)
        if log.ndim != 1 or not np.all(np.isfinite(log)):
            raise InputError("log-scaling must be a finite vector")
        log.setflags(write=False)
        self._log = log

    @classmethod
    def ones(cls, n):
        return cls(log=np.zeros(n))

    @classmethod
    def uniform(cls, n, gamma):
        return cls(log=np.full(n, math.log(gamma)))

    @property
    def log(self) -> np.ndarray:
        return self._log

    @property
    def gamma(self) -> np.ndarray:
        return np.exp(self._log)

    def __len__(self):
        return self._log.size

    def __repr__(self):
        return f"ScalingVector({np.array2string(self.gamma, precision=4)})"


def as_scaling(Y, n) -> ScalingVector:
    if Y is None:
        return ScalingVector.ones(n)
    if not isinstance(Y, ScalingVector):
        Y = ScalingVector(Y)
    if len(Y) != n:
        raise InputError(f"scaling vector has length {len(Y)}, expected {n}")
    return Y


# ---------------------------------------------------------------- file formats


def _tokens(path):
    """Yield (token, line, column) for every whitespace-separated token, skipping '#' lines."""
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith("#"):
            continue
        for match in re.finditer(r"\S+", line):
            yield match.group(), lineno, match.start() + 1


def _parse_number(tok, line, col, path, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise InputError(f"{path}:{line}:{col}: cannot parse {tok!r} as {kind.__name__}") from None


def read_matrix(path) -> np.ndarray:
    """Read ``n`` followed by ``n*n`` values (row-major) or ``n(n+1)/2`` lower-triangle values."""
    toks = list(_tokens(path))
    if not toks:
        raise InputError(f"{path}: empty matrix file")
    n = _parse_number(*toks[0], path, kind=int)
    if n < 1:
        raise InputError(f"{path}:{toks[0][1]}:{toks[0][2]}: order must be positive")
    vals = [_parse_number(t, ln, c, path) for t, ln, c in toks[1:]]
    if len(vals) == n * n:
        M = np.array(vals).reshape(n, n)
    elif len(vals) == n * (n + 1) // 2:
        M = np.zeros((n, n))
        M[np.tril_indices(n)] = vals
        M = M + np.tril(M, -1).T
    else:
        raise InputError(f"{path}: expected {n * n} or {n * (n + 1) // 2} values after n={n}, found {len(vals)}")
    return M


def read_numbers(path) -> np.ndarray:
    """All numbers in a whitespace text file, skipping '#' lines."""
    return np.array([_parse_number(t, ln, c, path) for t, ln, c in _tokens(path)])


def read_constraints(path):
    """Read ``m n`` then ``m`` rows of ``n`` coefficients followed by the right-hand side."""
    toks = list(_tokens(path))
    if len(toks) < 2:
        raise InputError(f"{path}: expected header 'm n'")
    m = _parse_number(*toks[0], path, kind=int)
    n = _parse_number(*toks[1], path, kind=int)
    body = toks[2:]
    if len(body) != m * (n + 1):
        raise InputError(f"{path}: expected {m * (n + 1)} values for m={m}, n={n}, found {len(body)}")
    vals = np.array([_parse_number(t, ln, c, path) for t, ln, c in body]).reshape(m, n + 1)
    return vals[:, :n], vals[:, n]


def write_matrix(path, C):
    C = np.asarray(C, dtype=float)
    lines = [str(C.shape[0])]
    lines += [" ".join(repr(float(v)) for v in row) for row in C]
    Path(path).write_text("\n".join(lines) + "\n")


def write_constraints(path, A, b):
    A = np.asarray(A, dtype=float)
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in (*row, rhs)) for row, rhs in zip(A, b)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_instance(matrix_path, s, constraints_path=None) -> Instance:
    C = read_matrix(matrix_path)
    A = b = None
    if constraints_path is not None:
        A, b = read_constraints(constraints_path)
        if A.shape[1] != C.shape[0]:
            raise InputError(f"{constraints_path}: constraint width {A.shape[1]} != matrix order {C.shape[0]}")
    return Instance(C, s, A, b)


# ----------------------------------------------------------------- operations


def complement(inst: Instance):
    """Map ``(C, s, A, b)`` to ``(C^-1, n-s, -A, b - A e)``.

    Returns the complementary instance and the offset ``ldet C``; a bound on the
    complement plus the offset bounds the original optimum.
    """
    lam = inst.eig.values
    if not lam[-1] > INVERTIBLE_RTOL * lam[0]:
        raise DomainError(f"C is numerically singular (lambda_min={lam[-1]:.3e})", lambda_min=float(lam[-1]))
    Q = inst.eig.vectors
    Cinv = (Q / lam) @ Q.T
    offset = float(np.sum(np.log(lam)))
    A = -inst.A
    b = inst.b - inst.A.sum(axis=1)
    return Instance(Cinv, inst.n - inst.s, A, b), offset


def _cardinality_min(a, s):
    return float(np.sort(a)[:s].sum())


def gen_side_constraints(inst: Instance, m: int, seed, x_best, max_retries: int = 100, check=None) -> Instance:
    """Append ``m`` random rows ``a x <= b`` that cut off the solution ``x_best``.

    Each ``a`` is uniform on ``{-2,...,2}^n`` and ``b = ceil(a x_best) - 1``.  Rows
    that are zero or unsatisfiable by any ``s``-subset are redrawn; ``check``
    (optional) receives the candidate instance and may reject it by returning
    False, e.g. to require a feasible subset to remain.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x_best = np.asarray(x_best, dtype=float)
    if x_best.shape != (inst.n,):
        raise InputError("x_best must be an n-vector")
    A_rows, b_rows = list(inst.A), list(inst.b)
    for _ in range(m):
        for _attempt in range(max_retries):
            a = rng.integers(-2, 3, size=inst.n).astype(float)
            rhs = math.ceil(float(a @ x_best) - 1e-9) - 1.0
            if not np.any(a) or _cardinality_min(a, inst.s) > rhs:
                continue
            cand = inst.with_constraints(np.array(A_rows + [a]), np.array(b_rows + [rhs]))
            if check is not None and not check(cand):
                continue
            A_rows.append(a)
            b_rows.append(rhs)
            break
        else:
            raise DomainError(f"could not draw a valid side constraint in {max_retries} attempts")
    return inst.with_constraints(np.array(A_rows), np.array(b_rows))


def random_instance(rng, n, s=None, delta=None, rank=None) -> Instance:
    """``C = G G^T + delta I`` with Gaussian ``G``; used by tests and the experiment runner."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    k = n if rank is None else rank
    G = rng.standard_normal((n, k)) / math.sqrt(k)
    if delta is None:
        delta = rng.uniform(0.05, 0.5)
    C = G @ G.T + delta * np.eye(n)
    if s is None:
        s = int(rng.integers(1, n))
    return Instance(C, s)
