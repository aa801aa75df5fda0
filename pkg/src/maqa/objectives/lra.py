"""Minimum and maximum long-run average fraction of time spent in goal states."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .. import graph
from ..graph import MARKOV, MaxEndComponent
from ..model import GoalSet, MarkovAutomaton, ModelError, choice_matrix
from ..numeric import SolverError, SspInstance, TwoCostMdp, longrun_ratio_min, ratio_slack, ssp_lp, ssp_value_iteration
from ..result import AnalysisResult
from .common import as_goal, check_direction, policy_labels, prepared
from .expected_time import ZenoError

# slack under which a ratio-program row counts as tight
TIGHT_TOL = 1e-9


@dataclass
class LraQuery:
    goal: GoalSet
    direction: str = "min"
    engine: str = "vi"
    tol: float = 1e-8
    lp_backend: str = "auto"
    notes: list[str] = field(default_factory=list)


def _choice_ids(ma: MarkovAutomaton, s: int) -> list[int]:
    return list(range(len(ma.prob_transitions[s]))) if ma.prob_transitions[s] else [MARKOV]


def _choice_dist(ma: MarkovAutomaton, s: int, c: int) -> dict[int, float]:
    if c == MARKOV:
        row: dict[int, float] = {}
        for t, r in ma.markov_transitions[s]:
            row[t] = row.get(t, 0.0) + r
        e = sum(row.values())
        return {t: r / e for t, r in row.items()}
    return ma.prob_transitions[s][c][1].as_dict()


def _exit(ma: MarkovAutomaton, s: int) -> float:
    return sum(r for _, r in ma.markov_transitions[s])


def unichain_mdp(ma: MarkovAutomaton, mec: MaxEndComponent, goal: set[int]) -> tuple[TwoCostMdp, list[int]]:
    """Two-cost MDP of one MEC: residence time in goal states over residence time."""
    states = sorted(mec.states)
    idx = {s: i for i, s in enumerate(states)}
    ptr = [0]
    rows, cols, vals, c1, c2 = [], [], [], [], []
    r = 0
    for s in states:
        for c in sorted(mec.actions[s]):
            for t, p in _choice_dist(ma, s, c).items():
                rows.append(r)
                cols.append(idx[t])
                vals.append(p)
            if c == MARKOV:
                dwell = 1.0 / _exit(ma, s)
                c1.append(dwell if s in goal else 0.0)
                c2.append(dwell)
            else:
                c1.append(0.0)
                c2.append(0.0)
            r += 1
        ptr.append(r)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(r, len(states)))
    return TwoCostMdp(np.asarray(ptr), P, np.asarray(c1), np.asarray(c2)), states


def solve_unichain(ma: MarkovAutomaton, mec: MaxEndComponent, goal, direction: str = "min", backend: str = "auto") -> tuple[float, dict[int, int]]:
    """Optimal long-run fraction of time in ``goal`` inside a single MEC, plus
    an optimal retained choice per probabilistic member.

    ``goal`` is intersected with the MEC's Markovian states.  The max
    direction minimises the fraction spent in the complement instead.
    """
    check_direction(direction)
    markovian = {s for s in mec.states if not ma.prob_transitions[s]}
    if not markovian:
        raise ZenoError(f"end component without Markovian states: {', '.join(ma.name(s) for s in sorted(mec.states)[:10])}")
    goal = set(goal) & markovian
    if direction == "max":
        k, choice = solve_unichain(ma, mec, markovian - goal, "min", backend)
        return 1.0 - k, choice
    if not goal or goal == markovian:
        allowed = {s: set(mec.actions[s]) for s in mec.states}
        return (1.0 if goal else 0.0), _recurrent_choice(ma, mec, allowed, markovian)
    mdp, states = unichain_mdp(ma, mec, goal)
    res = longrun_ratio_min(mdp, backend=backend)
    slack = ratio_slack(mdp, res.k, res.x)
    scale = max(1.0, float(np.abs(res.x).max()))
    tight: dict[int, set[int]] = {}
    for i, s in enumerate(states):
        lo = mdp.state_ptr[i]
        acts = sorted(mec.actions[s])
        tight[s] = {c for j, c in enumerate(acts) if slack[lo + j] <= TIGHT_TOL * scale}
    return float(min(1.0, max(0.0, res.k))), _recurrent_choice(ma, mec, tight, markovian)


def _attract(ma: MarkovAutomaton, region: set[int], allowed: dict[int, set[int]], targets: set[int]) -> dict[int, int]:
    """Attractor of ``targets`` inside ``region`` using ``allowed`` choices
    whose support stays in ``region``; returns the choice per attracted state."""
    out: dict[int, int] = {}
    level = set(targets)
    pending = region - level
    while pending:
        new = {}
        for s in sorted(pending):
            for c in sorted(allowed[s]):
                dist = _choice_dist(ma, s, c)
                if set(dist) <= region and any(t in level for t in dist):
                    new[s] = c
                    break
        if not new:
            break
        out.update(new)
        level |= set(new)
        pending -= set(new)
    return out


def _recurrent_choice(ma: MarkovAutomaton, mec: MaxEndComponent, allowed: dict[int, set[int]], markovian: set[int]) -> dict[int, int]:
    """Choice per probabilistic member such that every recurrent class uses
    ``allowed`` choices only and contains a Markovian state.

    The core is the largest set closed under allowed choices from which a
    Markovian state is reached through them; the rest of the MEC is steered
    into the core."""
    core = set(mec.states)
    while True:
        closed = {s for s in core if any(set(_choice_dist(ma, s, c)) <= core for c in allowed[s])}
        anchors = closed & markovian
        reached = anchors | set(_attract(ma, closed, allowed, anchors))
        if reached == core:
            break
        core = reached
    if not core:
        raise SolverError("no optimal recurrent class found inside the end component")
    choice = _attract(ma, core, allowed, core & markovian)
    everything = {s: set(mec.actions[s]) for s in mec.states}
    choice.update(_attract(ma, set(mec.states), everything, core))
    return {s: c for s, c in choice.items() if s not in markovian}


def lra_unichain(ma: MarkovAutomaton, mec: MaxEndComponent, goal, direction: str = "min", backend: str = "auto") -> float:
    return solve_unichain(ma, mec, goal, direction, backend)[0]


def _steer(ma: MarkovAutomaton, mec: MaxEndComponent, target: int, exit_choice: int) -> dict[int, int]:
    """Retained choices driving every member of ``mec`` to ``target`` almost surely."""
    out = {target: exit_choice}
    level = {target}
    pending = set(mec.states) - level
    while pending:
        new = {}
        for s in pending:
            for c in sorted(mec.actions[s]):
                if any(t in level for t in _choice_dist(ma, s, c)):
                    new[s] = c
                    break
        if not new:
            break
        out.update(new)
        level |= set(new)
        pending -= set(new)
    return out


@dataclass
class Quotient:
    """Quotient SSP: every MEC j collapses into a decision state u_j and a
    commit state q_j (goal, terminal cost = the MEC's LRA)."""

    inst: SspInstance
    state_names: list[str]
    # per quotient state: model state (transient states) or -1
    origin: np.ndarray
    # per quotient state: MEC index (u_j and q_j) or -1
    mec_of: np.ndarray
    # per quotient row: (model state, choice id) or None for u_j -> q_j
    row_source: list[tuple[int, int] | None]
    # model state -> quotient state (u_j for MEC members)
    node_of: np.ndarray

    def successors(self, q: int) -> list[dict[str, float]]:
        """Per row of quotient state ``q``: successor-name -> probability."""
        M = self.inst.matrix
        out = []
        for r in range(self.inst.state_ptr[q], self.inst.state_ptr[q + 1]):
            lo, hi = M.indptr[r], M.indptr[r + 1]
            out.append({self.state_names[t]: float(p) for t, p in zip(M.indices[lo:hi], M.data[lo:hi])})
        return out


def build_quotient(ma: MarkovAutomaton, mecs: list[MaxEndComponent], lra_values: list[float]) -> Quotient:
    """Each MEC-leaving pair (s, a) of a member s becomes its own choice of
    u_j; mass into MEC k is redirected to u_k and mass into u_j's own MEC to
    u_j itself."""
    n = ma.num_states
    mec_index = np.full(n, -1, dtype=np.int64)
    for j, m in enumerate(mecs):
        mec_index[list(m.states)] = j
    transient = [s for s in range(n) if mec_index[s] < 0]
    names: list[str] = [ma.name(s) for s in transient]
    origin = list(transient)
    mec_of = [-1] * len(transient)
    node_of = np.full(n, -1, dtype=np.int64)
    node_of[transient] = np.arange(len(transient))
    base = len(transient)
    k = len(mecs)
    u = [base + j for j in range(k)]
    q = [base + k + j for j in range(k)]
    for j in range(k):
        names.append(f"u{j + 1}")
        origin.append(-1)
        mec_of.append(j)
        node_of[list(mecs[j].states)] = u[j]
    for j in range(k):
        names.append(f"q{j + 1}")
        origin.append(-1)
        mec_of.append(j)
    N = base + 2 * k

    rows, cols, vals = [], [], []
    ptr = [0]
    source: list[tuple[int, int] | None] = []

    def emit(s: int, c: int) -> None:
        r = len(source)
        merged: dict[int, float] = {}
        for t, p in _choice_dist(ma, s, c).items():
            node = int(node_of[t])
            merged[node] = merged.get(node, 0.0) + p
        for node in sorted(merged):
            rows.append(r)
            cols.append(node)
            vals.append(merged[node])
        source.append((s, c))

    for s in transient:
        for c in _choice_ids(ma, s):
            emit(s, c)
        ptr.append(len(source))
    for j, m in enumerate(mecs):
        for s in sorted(m.states):
            for c in _choice_ids(ma, s):
                if c not in m.actions[s]:
                    emit(s, c)
        rows.append(len(source))
        cols.append(q[j])
        vals.append(1.0)
        source.append(None)
        ptr.append(len(source))
    for j in range(k):
        ptr.append(len(source))
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(source), N))
    goal = np.zeros(N, dtype=bool)
    goal[q] = True
    terminal = np.zeros(N)
    terminal[q] = lra_values
    inst = SspInstance(np.asarray(ptr), matrix, np.zeros(len(source)), goal, terminal)
    return Quotient(inst, names, np.asarray(origin), np.asarray(mec_of), source, node_of)


def lra(ma: MarkovAutomaton, query: LraQuery) -> AnalysisResult:
    check_direction(query.direction)
    if query.engine not in ("vi", "lp"):
        raise ValueError(f"engine must be 'vi' or 'lp', not {query.engine!r}")
    t0 = time.perf_counter()
    n = ma.num_states
    goal = as_goal(query.goal, n)
    notes = list(query.notes)
    pm = prepared(ma, notes)
    G = {s for s in goal.members if not pm.prob_transitions[s]}
    if len(G) < len(goal):
        notes.append(f"{len(goal) - len(G)} probabilistic goal state(s) ignored (no residence time)")
    mecs = graph.mec_decompose(pm)
    solved = [solve_unichain(pm, m, G, query.direction, query.lp_backend) for m in mecs]
    per_mec = [v for v, _ in solved]
    quot = build_quotient(pm, mecs, per_mec)
    if query.engine == "vi":
        vv = ssp_value_iteration(quot.inst, query.direction, tol=query.tol)
    else:
        vv = ssp_lp(quot.inst, query.direction, backend=query.lp_backend)
    values = np.clip(vv.values[quot.node_of], 0.0, 1.0)
    cm = choice_matrix(pm)
    picked: dict[int, int] = {}
    for node in range(quot.inst.n):
        r = int(vv.policy[node])
        if r < 0:
            continue
        j = int(quot.mec_of[node])
        src = quot.row_source[r]
        if j < 0:
            picked[int(quot.origin[node])] = src[1]
        elif src is None:
            picked.update(solved[j][1])
        else:
            picked.update(_steer(pm, mecs[j], *src))
    chosen = np.full(n, -1, dtype=np.int64)
    for s, c in picked.items():
        if c != MARKOV:
            chosen[s] = cm.state_ptr[s] + c
    policy = policy_labels(ma, cm, chosen, range(n))
    return AnalysisResult(
        objective="lra",
        direction=query.direction,
        value=float(values[ma.initial]),
        values=values,
        tol=query.tol if query.engine == "vi" else None,
        policy=policy,
        time_s=time.perf_counter() - t0,
        states=n,
        goal_states=len(goal),
        transitions=ma.num_transitions(),
        state_names=ma.names(),
        notes=notes,
        extra={"engine": query.engine, "mecs": len(mecs), "mec_values": per_mec},
    )
