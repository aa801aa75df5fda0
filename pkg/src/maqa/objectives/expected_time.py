"""Minimum and maximum expected time to reach a goal set."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import graph
from ..model import GoalSet, MarkovAutomaton, ModelError, choice_matrix
from ..numeric import SspInstance, ssp_lp, ssp_value_iteration
from ..result import AnalysisResult
from .common import absorb, as_goal, check_direction, policy_labels, prepared


@dataclass
class ExpectedTimeQuery:
    goal: GoalSet
    direction: str = "min"
    engine: str = "vi"
    tol: float = 1e-8
    lp_backend: str = "auto"
    notes: list[str] = field(default_factory=list)


class ZenoError(ModelError):
    pass


def finite_region(ma: MarkovAutomaton, goal: set[int], direction: str) -> set[int]:
    """States with finite optimal expected time on a goal-absorbed model."""
    if direction == "min":
        return graph.almost_sure_reach_exists(ma, goal)
    return graph.almost_sure_reach_forall(ma, goal)


def build_ssp(ma: MarkovAutomaton, goal: set[int], finite: set[int]):
    """SSP over the finite region of a prepared, goal-absorbed model.

    Returns the instance, the kept states (instance index -> model state),
    the global row ids of every kept choice, and the choice matrix.
    """
    cm = choice_matrix(ma)
    keep = np.array(sorted(finite | goal), dtype=np.int64)
    local = np.full(ma.num_states, -1, dtype=np.int64)
    local[keep] = np.arange(keep.size)
    inside = np.zeros(ma.num_states, dtype=bool)
    inside[keep] = True
    M = cm.matrix
    ptr = [0]
    rows: list[int] = []
    for s in keep:
        if s not in goal:
            for r in cm.rows_of(int(s)):
                if inside[M.indices[M.indptr[r]:M.indptr[r + 1]]].all():
                    rows.append(r)
        ptr.append(len(rows))
    rows_arr = np.asarray(rows, dtype=np.int64)
    sub = M[rows_arr][:, keep] if rows_arr.size else sp.csr_matrix((0, keep.size))
    states_of_rows = cm.row_state[rows_arr]
    cost = np.zeros(rows_arr.size)
    mk = cm.markovian[states_of_rows]
    cost[mk] = 1.0 / cm.exit_rate[states_of_rows[mk]]
    goal_mask = np.zeros(keep.size, dtype=bool)
    goal_mask[local[sorted(goal)]] = True
    inst = SspInstance(np.asarray(ptr), sub, cost, goal_mask, np.zeros(keep.size))
    return inst, keep, rows_arr, cm


def expected_time(ma: MarkovAutomaton, query: ExpectedTimeQuery) -> AnalysisResult:
    check_direction(query.direction)
    if query.engine not in ("vi", "lp"):
        raise ValueError(f"engine must be 'vi' or 'lp', not {query.engine!r}")
    t0 = time.perf_counter()
    n = ma.num_states
    goal = as_goal(query.goal, n)
    notes = list(query.notes)
    pm = absorb(prepared(ma, notes), goal.members)
    G = set(goal.members)
    values = np.full(n, np.inf)
    policy: dict[int, str] = {}
    extra: dict = {"engine": query.engine}
    if G:
        finite = finite_region(pm, G, query.direction)
        zeno = graph.zeno_check(pm, reachable_only=False) & (finite - G)
        if zeno:
            names = ", ".join(pm.name(s) for s in sorted(zeno)[:10])
            raise ZenoError(f"probabilistic cycle inside the finite-value region: {names}")
        inst, keep, rows, cm = build_ssp(pm, G, finite)
        if query.engine == "vi":
            vv = ssp_value_iteration(inst, query.direction, tol=query.tol)
            extra["iterations"] = vv.iterations
            if not vv.monotone:
                notes.append("value iteration was not monotone")
        else:
            vv = ssp_lp(inst, query.direction, backend=query.lp_backend)
            extra["lp_backend"] = vv.meta.get("backend")
        values[keep] = vv.values
        values[list(G)] = 0.0
        chosen = np.full(n, -1, dtype=np.int64)
        has = vv.policy >= 0
        chosen[keep[has]] = rows[vv.policy[has]]
        policy = policy_labels(ma, cm, chosen, keep)
        extra["infinite_states"] = int(n - keep.size)
    else:
        notes.append("empty goal set: every expected time is infinite")
    return AnalysisResult(
        objective="et",
        direction=query.direction,
        value=float(values[ma.initial]),
        values=values,
        tol=query.tol if query.engine == "vi" else None,
        policy=policy,
        time_s=time.perf_counter() - t0,
        states=n,
        goal_states=len(G),
        transitions=ma.num_transitions(),
        state_names=ma.names(),
        notes=notes,
        extra=extra,
    )

