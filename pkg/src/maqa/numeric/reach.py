"""Optimal expected terminal value over zero-time choices.

Given choices for a set of *free* states and fixed values on all other
states, compute for every free state the optimal (min or max) expected value
of the first non-free state reached.  The free part is split into SCCs and
processed level by level from the sinks: acyclic levels need a single
vectorised pass, levels containing a cycle are iterated to ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..graph import is_nontrivial, tarjan
from .ssp import ValueVector, greedy_rows, segment_reduce

MAX_INNER_SWEEPS = 10**7


@dataclass
class _Level:
    states: np.ndarray
    rows: np.ndarray
    matrix: sp.csr_matrix
    starts: np.ndarray
    cyclic: bool


class ReachPlan:
    """Precomputed evaluation order for repeated solves on one structure."""

    def __init__(self, state_ptr: np.ndarray, matrix: sp.csr_matrix, free: np.ndarray, direction: str):
        if direction not in ("min", "max"):
            raise ValueError(f"direction must be 'min' or 'max', not {direction!r}")
        self.direction = direction
        self.state_ptr = np.asarray(state_ptr, dtype=np.int64)
        matrix = sp.csr_matrix(matrix)
        self.n = matrix.shape[1]
        free = np.asarray(free, dtype=bool)
        self.free = free
        free_idx = np.flatnonzero(free)
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for s in free_idx:
            lo, hi = self.state_ptr[s], self.state_ptr[s + 1]
            if lo == hi:
                raise ValueError(f"free state {s} has no choices")
            succ = np.unique(matrix.indices[matrix.indptr[lo]:matrix.indptr[hi]])
            adj[s] = [int(t) for t in succ if free[t]]
        comps = tarjan(adj, [int(s) for s in free_idx])
        level_of: dict[int, int] = {}
        groups: dict[int, list[list[int]]] = {}
        for comp in comps:  # sinks first
            members = set(comp)
            lvl = 0
            for s in comp:
                for t in adj[s]:
                    if t not in members:
                        lvl = max(lvl, level_of[t] + 1)
            for s in comp:
                level_of[s] = lvl
            groups.setdefault(lvl, []).append(comp)
        self.levels: list[_Level] = []
        for lvl in sorted(groups):
            comps_l = groups[lvl]
            states = np.array(sorted(s for c in comps_l for s in c), dtype=np.int64)
            counts = self.state_ptr[states + 1] - self.state_ptr[states]
            rows = np.concatenate([np.arange(self.state_ptr[s], self.state_ptr[s + 1]) for s in states])
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
            cyclic = any(is_nontrivial(c, adj) for c in comps_l)
            self.levels.append(_Level(states, rows, matrix[rows], starts, cyclic))

    @property
    def depth(self) -> int:
        return len(self.levels)

    def evaluate(self, v: np.ndarray, tol: float = 1e-12) -> int:
        """Overwrite the free entries of ``v``; returns inner sweeps spent on cycles."""
        sweeps = 0
        for lv in self.levels:
            if not lv.cyclic:
                v[lv.states] = segment_reduce(lv.matrix @ v, lv.starts, self.direction)
                continue
            v[lv.states] = 0.0
            for _ in range(MAX_INNER_SWEEPS):
                new = segment_reduce(lv.matrix @ v, lv.starts, self.direction)
                diff = float(np.abs(new - v[lv.states]).max())
                v[lv.states] = new
                sweeps += 1
                if diff <= tol:
                    break
        return sweeps

    def policy(self, v: np.ndarray) -> np.ndarray:
        pol = np.full(len(self.state_ptr) - 1, -1, dtype=np.int64)
        for lv in self.levels:
            local = greedy_rows(lv.matrix @ v, lv.starts, self.direction)
            pol[lv.states] = lv.rows[local]
        return pol


def mdp_reach(state_ptr, matrix, terminal: np.ndarray, values: np.ndarray, direction: str = "max", tol: float = 1e-12) -> ValueVector:
    """Optimal expected terminal value for all non-terminal states.

    ``terminal`` masks the states whose value is fixed to ``values``; every
    other state must have at least one choice.
    """
    terminal = np.asarray(terminal, dtype=bool)
    plan = ReachPlan(state_ptr, matrix, ~terminal, direction)
    v = np.where(terminal, np.asarray(values, dtype=float), 0.0)
    sweeps = plan.evaluate(v, tol)
    return ValueVector(v, direction, plan.policy(v), iterations=sweeps, meta={"levels": plan.depth})
