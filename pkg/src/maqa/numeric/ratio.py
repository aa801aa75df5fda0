"""Minimum long-run ratio of two accumulated costs in a communicating MDP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .simplex import OPTIMAL, LpProblem, SolverError, solve_lp


@dataclass
class TwoCostMdp:
    state_ptr: np.ndarray
    matrix: sp.csr_matrix
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        self.state_ptr = np.asarray(self.state_ptr, dtype=np.int64)
        self.matrix = sp.csr_matrix(self.matrix)
        self.c1 = np.asarray(self.c1, dtype=float)
        self.c2 = np.asarray(self.c2, dtype=float)

    @property
    def n(self) -> int:
        return len(self.state_ptr) - 1


@dataclass
class RatioResult:
    k: float
    x: np.ndarray
    backend: str


def longrun_ratio_min(mdp: TwoCostMdp, backend: str = "auto") -> RatioResult:
    """Maximise k s.t. x_s <= c1(s,a) - k c2(s,a) + sum_t P(s,a,t) x_t.

    The program is shift-invariant in x, so x of state 0 is pinned to zero and
    only k and the remaining x are free variables (column 0 is k).
    """
    n = mdp.n
    if n == 0:
        raise SolverError("empty MDP")
    rows = np.repeat(np.arange(n), np.diff(mdp.state_ptr))
    m = rows.size
    own = sp.csr_matrix((np.ones(m), (np.arange(m), rows)), shape=(m, n))
    X = (own - mdp.matrix)[:, 1:]
    A = sp.hstack([sp.csr_matrix(mdp.c2.reshape(-1, 1)), X]).tocsr()
    c = np.zeros(n)
    c[0] = 1.0
    lp = LpProblem(c=c, A=A, b=mdp.c1, senses=["<="] * m, maximize=True, free=np.ones(n, dtype=bool))
    res = solve_lp(lp, backend=backend)
    if res.status != OPTIMAL:
        raise SolverError(f"long-run ratio program is {res.status}; instance not unichain or Zeno")
    x = np.concatenate([[0.0], res.x[1:]])
    return RatioResult(float(res.x[0]), x, res.backend)


def ratio_slack(mdp: TwoCostMdp, k: float, x: np.ndarray) -> np.ndarray:
    """Per-row slack c1 - k c2 + P x - x_s (non-negative when feasible)."""
    rows = np.repeat(np.arange(mdp.n), np.diff(mdp.state_ptr))
    return mdp.c1 - k * mdp.c2 + mdp.matrix @ x - x[rows]
