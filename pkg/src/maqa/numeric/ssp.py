"""Stochastic shortest path kernels: value iteration and linear programming."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .simplex import OPTIMAL, UNBOUNDED, LpProblem, SolverError, solve_lp

DEFAULT_TOL = 1e-8
MAX_SWEEPS = 10**7
# relative slack under which two choices count as equally good
TIE_TOL = 1e-12


@dataclass
class SspInstance:
    """Non-negative SSP in flat form.

    Choices of state ``s`` are rows ``state_ptr[s]:state_ptr[s+1]`` of
    ``matrix``; goal states have no rows and pay ``terminal[s]`` on arrival.
    """

    state_ptr: np.ndarray
    matrix: sp.csr_matrix
    cost: np.ndarray
    goal: np.ndarray
    terminal: np.ndarray

    def __post_init__(self):
        self.state_ptr = np.asarray(self.state_ptr, dtype=np.int64)
        self.matrix = sp.csr_matrix(self.matrix)
        self.cost = np.asarray(self.cost, dtype=float)
        self.goal = np.asarray(self.goal, dtype=bool)
        self.terminal = np.asarray(self.terminal, dtype=float)
        counts = np.diff(self.state_ptr)
        if np.any(counts[~self.goal] == 0):
            raise ValueError("every non-goal state needs at least one choice")
        if np.any(counts[self.goal] != 0):
            raise ValueError("goal states must not have choices")
        if np.any(self.cost < 0) or np.any(self.terminal[self.goal] < 0):
            raise ValueError("costs must be non-negative")

    @property
    def n(self) -> int:
        return len(self.goal)


@dataclass
class ValueVector:
    values: np.ndarray
    direction: str
    policy: np.ndarray  # chosen row per state, -1 where there is no choice
    iterations: int = 0
    residual: float = 0.0
    monotone: bool = True
    meta: dict = field(default_factory=dict)


def _check_direction(direction: str) -> None:
    if direction not in ("min", "max"):
        raise ValueError(f"direction must be 'min' or 'max', not {direction!r}")


def segment_reduce(q: np.ndarray, starts: np.ndarray, direction: str) -> np.ndarray:
    if starts.size == 0:
        return np.zeros(0)
    f = np.minimum if direction == "min" else np.maximum
    return f.reduceat(q, starts)


def greedy_rows(q: np.ndarray, starts: np.ndarray, direction: str) -> np.ndarray:
    """Index of the first optimal row of every segment (lowest index wins ties)."""
    if starts.size == 0:
        return np.zeros(0, dtype=np.int64)
    best = segment_reduce(q, starts, direction)
    seg = np.zeros(q.size, dtype=np.int64)
    seg[starts[1:]] = 1
    seg = np.cumsum(seg)
    slack = TIE_TOL * np.maximum(1.0, np.abs(best[seg]))
    good = q <= best[seg] + slack if direction == "min" else q >= best[seg] - slack
    cand = np.where(good, np.arange(q.size), q.size)
    return np.minimum.reduceat(cand, starts)


def bellman(inst: SspInstance, v: np.ndarray, direction: str) -> tuple[np.ndarray, np.ndarray]:
    """One application of the SSP Bellman operator; returns (L(v), greedy rows)."""
    active = np.flatnonzero(~inst.goal)
    starts = inst.state_ptr[active]
    q = inst.cost + inst.matrix @ v
    out = np.where(inst.goal, inst.terminal, 0.0)
    out[active] = segment_reduce(q, starts, direction)
    policy = np.full(inst.n, -1, dtype=np.int64)
    policy[active] = greedy_rows(q, starts, direction)
    return out, policy


def ssp_value_iteration(inst: SspInstance, direction: str = "min", tol: float = DEFAULT_TOL, max_sweeps: int = MAX_SWEEPS) -> ValueVector:
    """Jacobi value iteration from v = 0 (goal states at their terminal cost)."""
    _check_direction(direction)
    active = np.flatnonzero(~inst.goal)
    starts = inst.state_ptr[active]
    v = np.where(inst.goal, inst.terminal, 0.0)
    monotone = True
    diff = 0.0
    for sweep in range(1, max_sweeps + 1):
        q = inst.cost + inst.matrix @ v
        new = segment_reduce(q, starts, direction)
        delta = new - v[active]
        if delta.size and delta.min() < -1e-12 * max(1.0, float(np.abs(new).max())):
            monotone = False
        diff = float(np.abs(delta).max()) if delta.size else 0.0
        v[active] = new
        if not np.all(np.isfinite(new)):
            raise SolverError("value iteration diverged")
        if diff <= tol:
            break
    else:
        raise SolverError(f"value iteration did not converge in {max_sweeps} sweeps (residual {diff:.3g}); unflagged infinite values?")
    q = inst.cost + inst.matrix @ v
    policy = np.full(inst.n, -1, dtype=np.int64)
    policy[active] = greedy_rows(q, starts, direction)
    return ValueVector(v, direction, policy, iterations=sweep, residual=diff, monotone=monotone)


def ssp_lp(inst: SspInstance, direction: str = "min", backend: str = "auto") -> ValueVector:
    """Optimal costs as the solution of a linear program.

    min: maximise sum(v) s.t. v_s <= c(s,a) + sum P(s,a,.) v for every choice;
    max: minimise sum(v) s.t. v_s >= c(s,a) + sum P(s,a,.) v.
    """
    _check_direction(direction)
    active = np.flatnonzero(~inst.goal)
    col = np.full(inst.n, -1, dtype=np.int64)
    col[active] = np.arange(active.size)
    P = inst.matrix.tocsc()
    goal_idx = np.flatnonzero(inst.goal)
    rhs = inst.cost + (P[:, goal_idx] @ inst.terminal[goal_idx] if goal_idx.size else 0.0)
    rows = np.repeat(np.arange(inst.n), np.diff(inst.state_ptr))
    own = sp.csr_matrix((np.ones(rows.size), (np.arange(rows.size), col[rows])), shape=(rows.size, active.size))
    A = own - P[:, active]
    sense = "<=" if direction == "min" else ">="
    lp = LpProblem(c=np.ones(active.size), A=sp.csr_matrix(A), b=np.asarray(rhs).ravel(), senses=[sense] * rows.size, maximize=direction == "min")
    res = solve_lp(lp, backend=backend)
    if res.status == UNBOUNDED:
        raise SolverError("SSP linear program is unbounded; unflagged infinite values?")
    if res.status != OPTIMAL:
        raise SolverError(f"SSP linear program is {res.status}")
    v = np.where(inst.goal, inst.terminal, 0.0)
    v[active] = res.x
    _, policy = bellman(inst, v, direction)
    return ValueVector(v, direction, policy, iterations=res.iterations, meta={"backend": res.backend})
