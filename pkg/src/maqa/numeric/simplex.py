"""Dense two-phase primal simplex with Bland's rule, plus a HiGHS route for
large programs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-10
# tableau cells above which backend="auto" hands the program to HiGHS
AUTO_DENSE_LIMIT = 400_000


class SolverError(RuntimeError):
    pass


@dataclass
class LpProblem:
    """``opt c.x`` subject to ``A[i].x <sense_i> b[i]``.

    Variables are non-negative unless flagged in ``free``.  ``A`` may be dense
    or scipy-sparse.
    """

    c: np.ndarray
    A: np.ndarray | sp.spmatrix
    b: np.ndarray
    senses: list[str]
    maximize: bool = False
    free: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,) or len(self.senses) != m:
            raise ValueError("inconsistent LP dimensions")
        bad = set(self.senses) - {"<=", ">=", "=="}
        if bad:
            raise ValueError(f"unknown constraint sense {bad}")
        self.free = np.zeros(n, dtype=bool) if self.free is None else np.asarray(self.free, dtype=bool)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    backend: str = "simplex"
    extra: dict = field(default_factory=dict)


def _pivot(T: np.ndarray, obj: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    obj -= obj[j] * T[r]


def _run(T: np.ndarray, obj: np.ndarray, basis: list[int], ncols: int, max_iter: int, tol: float) -> tuple[str, int]:
    """Minimise with Bland's rule over the first ``ncols`` columns."""
    it = 0
    while it < max_iter:
        red = obj[:ncols]
        candidates = np.flatnonzero(red < -tol)
        if candidates.size == 0:
            return OPTIMAL, it
        j = int(candidates[0])
        col = T[:, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, obj, r, j)
        basis[r] = j
        it += 1
    raise SolverError(f"simplex iteration cap {max_iter} reached")


def simplex_solve(lp: LpProblem, tol: float = PIVOT_TOL, max_iter: int | None = None) -> LpResult:
    A = lp.A.toarray() if sp.issparse(lp.A) else np.array(lp.A, dtype=float)
    b = lp.b.copy()
    c = lp.c.copy()
    m, n = A.shape
    # free variables become x+ - x-
    free_idx = np.flatnonzero(lp.free)
    A = np.hstack([A, -A[:, free_idx]])
    c = np.concatenate([c, -c[free_idx]])
    if lp.maximize:
        c = -c
    senses = list(lp.senses)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
            senses[i] = {"<=": ">=", ">=": "<=", "==": "=="}[senses[i]]
    nstruct = A.shape[1]
    n_slack = sum(s != "==" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    N = nstruct + n_slack + n_art
    T = np.zeros((m, N + 1))
    T[:, :nstruct] = A
    T[:, -1] = b
    basis = [0] * m
    si, ai = nstruct, nstruct + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, si] = 1.0
            basis[i] = si
            si += 1
        else:
            if s == ">=":
                T[i, si] = -1.0
                si += 1
            T[i, ai] = 1.0
            basis[i] = ai
            art_cols.append(ai)
            ai += 1
    if max_iter is None:
        max_iter = 50_000 + 50 * (m + N)
    iterations = 0

    if art_cols:
        obj = np.zeros(N + 1)
        obj[art_cols] = 1.0
        for i in range(m):
            if basis[i] in art_cols:
                obj -= T[i]
        status, it = _run(T, obj, basis, N, max_iter, tol)
        iterations += it
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if -obj[-1] > 1e-9 * scale:
            return LpResult(INFEASIBLE, iterations=iterations)
        art = set(art_cols)
        keep = []
        for i in range(m):
            if basis[i] in art:
                row = T[i, :nstruct + n_slack]
                nz = np.flatnonzero(np.abs(row) > tol)
                if nz.size == 0:
                    continue  # redundant constraint
                _pivot(T, obj, i, int(nz[0]))
                basis[i] = int(nz[0])
            keep.append(i)
        T = np.hstack([T[keep, :nstruct + n_slack], T[keep, -1:]])
        basis = [basis[i] for i in keep]
    else:
        T = np.hstack([T[:, :nstruct + n_slack], T[:, -1:]])
    ncols = nstruct + n_slack
    cost = np.zeros(ncols + 1)
    cost[:nstruct] = c
    obj = cost.copy()
    for i, j in enumerate(basis):
        if obj[j] != 0.0:
            obj -= obj[j] * T[i]
    status, it = _run(T, obj, basis, ncols, max_iter - iterations, tol)
    iterations += it
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, iterations=iterations)
    xs = np.zeros(ncols)
    for i, j in enumerate(basis):
        xs[j] = T[i, -1]
    x = xs[:n].copy()
    x[free_idx] -= xs[n:nstruct]
    value = float(lp.c @ x)
    return LpResult(OPTIMAL, x=x, objective=value, iterations=iterations)


def highs_solve(lp: LpProblem) -> LpResult:
    from scipy.optimize import linprog

    A = sp.csr_matrix(lp.A)
    senses = np.asarray(lp.senses)
    ub = senses != "=="
    sign = np.where(senses == ">=", -1.0, 1.0)
    A_ub = sp.diags(sign[ub]) @ A[ub] if ub.any() else None
    b_ub = (sign * lp.b)[ub] if ub.any() else None
    eq = ~ub
    A_eq = A[eq] if eq.any() else None
    b_eq = lp.b[eq] if eq.any() else None
    bounds = [(None, None) if f else (0, None) for f in lp.free]
    c = -lp.c if lp.maximize else lp.c
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        return LpResult(INFEASIBLE, backend="highs")
    if res.status == 3:
        return LpResult(UNBOUNDED, backend="highs")
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x)
    return LpResult(OPTIMAL, x=x, objective=float(lp.c @ x), iterations=int(res.nit), backend="highs")


def solve_lp(lp: LpProblem, backend: str = "auto") -> LpResult:
    """Dispatch to the dense simplex or HiGHS.

    ``auto`` keeps the dense tableau for programs with at most
    ``AUTO_DENSE_LIMIT`` cells (free variables counted twice).
    """
    if backend == "auto":
        m, n = lp.shape
        cells = m * (n + int(lp.free.sum()) + 2 * m)
        backend = "simplex" if cells <= AUTO_DENSE_LIMIT else "highs"
    if backend == "simplex":
        return simplex_solve(lp)
    if backend == "highs":
        return highs_solve(lp)
    raise ValueError(f"unknown LP backend {backend!r}")
