"""Structural analysis: SCCs, maximal end components, Zeno detection and
qualitative (graph-based) reachability.

Everything here is exact; no floating point decisions are taken.  A state's
*choices* are its probabilistic transitions, or the single bundle of its
Markovian transitions (the ``MARKOV`` choice) when it has no probabilistic
transition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import MarkovAutomaton, reachable_states

MARKOV = -1


def tarjan(adj: Sequence[Iterable[int]], nodes: Iterable[int] | None = None) -> list[list[int]]:
    """Strongly connected components, sinks first (reverse topological order).

    Iterative, so deep graphs do not hit the recursion limit.
    """
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    roots = range(n) if nodes is None else nodes
    for root in roots:
        if index[root] != -1:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def _adjacency(ma: MarkovAutomaton) -> list[list[int]]:
    return [sorted(ma.successors(s)) for s in range(ma.num_states)]


def choices(ma: MarkovAutomaton) -> list[list[tuple[int, frozenset[int]]]]:
    """Per state: ``(choice id, successor set)`` pairs."""
    out = []
    for s in range(ma.num_states):
        row = [(k, frozenset(mu.support())) for k, (_, mu) in enumerate(ma.prob_transitions[s])]
        if not row and ma.markov_transitions[s]:
            row.append((MARKOV, frozenset(t for t, _ in ma.markov_transitions[s])))
        out.append(row)
    return out


def scc_decompose(ma: MarkovAutomaton) -> list[list[int]]:
    return tarjan(_adjacency(ma))


def is_nontrivial(comp: Sequence[int], adj: Sequence[Iterable[int]]) -> bool:
    return len(comp) > 1 or comp[0] in adj[comp[0]]


def zeno_check(ma: MarkovAutomaton, reachable_only: bool = True) -> set[int]:
    """States of reachable, nontrivial SCCs made only of probabilistic states."""
    adj = _adjacency(ma)
    reach = reachable_states(ma) if reachable_only else None
    flagged: set[int] = set()
    for comp in tarjan(adj):
        if (reach is not None and comp[0] not in reach) or not is_nontrivial(comp, adj):
            continue
        if all(ma.prob_transitions[s] for s in comp):
            flagged.update(comp)
    return flagged


@dataclass(frozen=True)
class MaxEndComponent:
    states: frozenset[int]
    # retained choice ids per state (MARKOV for the Markovian bundle)
    actions: dict[int, frozenset[int]]

    def __contains__(self, s: int) -> bool:
        return s in self.states

    def __len__(self) -> int:
        return len(self.states)


def mec_decompose(ma: MarkovAutomaton, restrict: Iterable[int] | None = None) -> list[MaxEndComponent]:
    """Maximal end components by iterated SCC refinement.

    Choices leaving their SCC are pruned, states without choices are dropped,
    and the SCCs are recomputed until nothing changes.
    """
    ch = choices(ma)
    n = ma.num_states
    alive = [False] * n
    for s in (range(n) if restrict is None else restrict):
        alive[s] = bool(ch[s])
    allowed = {s: {c: succ for c, succ in ch[s]} for s in range(n) if alive[s]}
    while True:
        adj: list[list[int]] = [[] for _ in range(n)]
        for s, cs in allowed.items():
            targets = set()
            for succ in cs.values():
                targets.update(succ)
            adj[s] = sorted(t for t in targets if alive[t])
        comps = tarjan(adj, sorted(allowed))
        comp_of = {}
        for i, comp in enumerate(comps):
            for s in comp:
                comp_of[s] = i
        changed = False
        for s in list(allowed):
            cs = allowed[s]
            keep = {c: succ for c, succ in cs.items() if all(alive[t] and comp_of.get(t) == comp_of[s] for t in succ)}
            if len(keep) != len(cs):
                changed = True
                if keep:
                    allowed[s] = keep
                else:
                    del allowed[s]
                    alive[s] = False
        if not changed:
            break
    mecs = []
    for comp in comps:
        members = [s for s in comp if s in allowed]
        if not members:
            continue
        mecs.append(MaxEndComponent(frozenset(members), {s: frozenset(allowed[s]) for s in members}))
    mecs.sort(key=lambda m: min(m.states))
    return mecs


def _predecessors(ch) -> list[list[tuple[int, int]]]:
    n = len(ch)
    pred: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s in range(n):
        for i, (_, succ) in enumerate(ch[s]):
            for t in succ:
                pred[t].append((s, i))
    return pred


def almost_sure_reach_exists(ma: MarkovAutomaton, goal: Iterable[int]) -> set[int]:
    """States from which some policy reaches ``goal`` with probability 1."""
    ch = choices(ma)
    pred = _predecessors(ch)
    n = ma.num_states
    goal = set(goal)
    universe = set(range(n))
    while True:
        # choices that stay inside the current universe
        valid = [[all(t in universe for t in succ) for _, succ in ch[s]] for s in range(n)]
        reached = set(goal & universe)
        frontier = list(reached)
        while frontier:
            t = frontier.pop()
            for s, i in pred[t]:
                if s not in reached and s in universe and valid[s][i]:
                    reached.add(s)
                    frontier.append(s)
        if reached == universe:
            return reached
        universe = reached


def avoid_forever_exists(ma: MarkovAutomaton, goal: Iterable[int]) -> set[int]:
    """States from which some policy never visits ``goal`` (min reach prob 0)."""
    ch = choices(ma)
    goal = set(goal)
    z = set(range(ma.num_states)) - goal
    changed = True
    while changed:
        changed = False
        for s in list(z):
            if not any(all(t in z for t in succ) for _, succ in ch[s]):
                z.discard(s)
                changed = True
    return z


def can_reach(ma: MarkovAutomaton, targets: Iterable[int], avoid: Iterable[int] = ()) -> set[int]:
    """Backward graph reachability of ``targets`` through states not in ``avoid``."""
    ch = choices(ma)
    pred = _predecessors(ch)
    avoid = set(avoid)
    seen = set(targets)
    frontier = list(seen)
    while frontier:
        t = frontier.pop()
        for s, _ in pred[t]:
            if s not in seen and s not in avoid:
                seen.add(s)
                frontier.append(s)
    return seen


def almost_sure_reach_forall(ma: MarkovAutomaton, goal: Iterable[int]) -> set[int]:
    """States from which every policy reaches ``goal`` with probability 1."""
    goal = set(goal)
    escape = avoid_forever_exists(ma, goal)
    bad = can_reach(ma, escape, avoid=goal)
    return set(range(ma.num_states)) - bad
