"""Helpers shared by the objective engines."""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable

import numpy as np

from ..model import ChoiceMatrix, GoalSet, MarkovAutomaton, prepare

DIRECTIONS = ("min", "max")


def check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be 'min' or 'max', not {direction!r}")


def as_goal(goal: GoalSet | Iterable[int], n: int) -> GoalSet:
    if not isinstance(goal, GoalSet):
        goal = GoalSet(frozenset(int(s) for s in goal))
    bad = [s for s in goal.members if not 0 <= s < n]
    if bad:
        raise ValueError(f"goal state(s) {sorted(bad)} out of range")
    return goal


def prepared(ma: MarkovAutomaton, notes: list[str]) -> MarkovAutomaton:
    pm, dead = prepare(ma)
    if dead:
        names = ", ".join(ma.name(s) for s in dead[:5])
        more = "" if len(dead) <= 5 else f" (+{len(dead) - 5} more)"
        notes.append(f"{len(dead)} deadlock state(s) given a rate-1 self-loop: {names}{more}")
    return pm


def absorb(ma: MarkovAutomaton, states: Iterable[int]) -> MarkovAutomaton:
    """Replace the transitions of ``states`` by a rate-1 Markovian self-loop."""
    states = set(states)
    if not states:
        return ma
    prob = list(ma.prob_transitions)
    markov = list(ma.markov_transitions)
    for s in states:
        prob[s] = ()
        markov[s] = ((s, 1.0),)
    return replace(ma, prob_transitions=tuple(prob), markov_transitions=tuple(markov))


def policy_labels(original: MarkovAutomaton, cm: ChoiceMatrix, rows: np.ndarray, states: Iterable[int]) -> dict[int, str]:
    """Map chosen choice rows back to the action labels of the unhidden model.

    Only states with more than one probabilistic alternative are reported;
    labels that are ambiguous within a state get a ``#index`` suffix.
    """
    out = {}
    for s in states:
        r = int(rows[s])
        if r < 0 or cm.markovian[s] or cm.state_ptr[s + 1] - cm.state_ptr[s] < 2:
            continue
        k = int(cm.local_index[r])
        labels = [a for a, _ in original.prob_transitions[s]]
        label = labels[k]
        out[s] = label if labels.count(label) == 1 else f"{label}#{k}"
    return out
