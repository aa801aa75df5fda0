"""Markov automaton data model.

A Markov automaton mixes action-labelled probabilistic transitions (to a
distribution over states) with Markovian transitions carrying exponential
rates.  Instances are immutable; build them with :class:`MABuilder` or one of
the front-ends (``maqa.io``, ``maqa.gspn``, ``maqa.generators``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

TAU = "tau"
# pseudo action of a Markovian state in the induced MDP
MARKOV_ACTION = "!"

NORMALIZATION_TOL = 1e-9
ROUNDING_SLACK = 4 * 2.0**-52


class ModelError(ValueError):
    """Raised when a model is structurally unusable."""


class ResourceError(RuntimeError):
    """A configured size or iteration limit would be exceeded."""


@dataclass(frozen=True)
class Distribution:
    """Finite probability distribution over state indices.

    The plain constructor performs no checks so that malformed input can still
    be represented and reported by :func:`validate`; use :meth:`of` to build a
    checked, canonical distribution.
    """

    entries: tuple[tuple[int, float], ...]

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, float]] | Mapping[int, float], tol: float = NORMALIZATION_TOL) -> "Distribution":
        if isinstance(pairs, Mapping):
            pairs = pairs.items()
        merged: dict[int, float] = {}
        for target, p in pairs:
            if p < 0 or not math.isfinite(p):
                raise ModelError(f"invalid probability {p!r} for state {target}")
            if p == 0:
                continue
            merged[int(target)] = merged.get(int(target), 0.0) + float(p)
        total = math.fsum(merged.values())
        if abs(total - 1.0) > tol:
            raise ModelError(f"distribution sums to {total:.12g}")
        # deviations at rounding level are kept so that written values read back bit-exactly
        if abs(total - 1.0) > ROUNDING_SLACK * max(1, len(merged)):
            merged = {t: p / total for t, p in merged.items()}
        return cls(tuple(merged.items()))

    @classmethod
    def dirac(cls, target: int) -> "Distribution":
        return cls(((int(target), 1.0),))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def support(self) -> list[int]:
        return [t for t, _ in self.entries]

    def total(self) -> float:
        return math.fsum(p for _, p in self.entries)

    def as_dict(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for t, p in self.entries:
            out[t] = out.get(t, 0.0) + p
        return out


@dataclass(frozen=True)
class MarkovAutomaton:
    num_states: int
    initial: int
    # per state: ((action label, distribution), ...)
    prob_transitions: tuple[tuple[tuple[str, Distribution], ...], ...]
    # per state: ((target, rate), ...); parallel edges are kept
    markov_transitions: tuple[tuple[tuple[int, float], ...], ...]
    labels: Mapping[str, frozenset[int]] = field(default_factory=dict)
    state_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.prob_transitions) != self.num_states or len(self.markov_transitions) != self.num_states:
            raise ModelError("transition tables do not match num_states")
        if self.state_names is not None and len(self.state_names) != self.num_states:
            raise ModelError("state_names does not match num_states")

    @property
    def actions(self) -> tuple[str, ...]:
        """Action table; index 0 is always the internal action."""
        seen = {a for row in self.prob_transitions for a, _ in row}
        seen.discard(TAU)
        return (TAU, *sorted(seen))

    def name(self, s: int) -> str:
        return self.state_names[s] if self.state_names is not None else f"s{s}"

    def names(self) -> tuple[str, ...]:
        return self.state_names if self.state_names is not None else tuple(f"s{i}" for i in range(self.num_states))

    def is_markovian(self, s: int) -> bool:
        return bool(self.markov_transitions[s]) and not self.prob_transitions[s]

    def is_probabilistic(self, s: int) -> bool:
        return bool(self.prob_transitions[s])

    def num_transitions(self) -> int:
        """Number of probabilistic blocks plus Markovian blocks (one per state with rates)."""
        return sum(len(p) + (1 if m else 0) for p, m in zip(self.prob_transitions, self.markov_transitions))

    def successors(self, s: int) -> set[int]:
        out = {t for _, mu in self.prob_transitions[s] for t, _ in mu}
        out.update(t for t, _ in self.markov_transitions[s])
        return out

    def with_labels(self, labels: Mapping[str, Iterable[int]]) -> "MarkovAutomaton":
        merged = dict(self.labels)
        merged.update({k: frozenset(v) for k, v in labels.items()})
        return replace(self, labels=merged)


class StateClass:
    MARKOVIAN = "MS"
    PROBABILISTIC = "PS"
    DEADLOCK = "deadlock"


def classify(ma: MarkovAutomaton) -> list[str]:
    """Per-state class. Meaningful after maximal-progress closure."""
    out = []
    for s in range(ma.num_states):
        if ma.prob_transitions[s]:
            out.append(StateClass.PROBABILISTIC)
        elif ma.markov_transitions[s]:
            out.append(StateClass.MARKOVIAN)
        else:
            out.append(StateClass.DEADLOCK)
    return out


@dataclass(frozen=True)
class GoalSet:
    members: frozenset[int]
    source: str = ""

    def __contains__(self, s: int) -> bool:
        return s in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        if self.members:
            m[list(self.members)] = True
        return m


class MABuilder:
    """Incremental, single-owner construction of a :class:`MarkovAutomaton`."""

    def __init__(self):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._prob: list[list[tuple[str, Distribution]]] = []
        self._markov: list[list[tuple[int, float]]] = []
        self._labels: dict[str, set[int]] = {}
        self.initial = 0

    def __len__(self) -> int:
        return len(self._names)

    def state(self, name: str) -> int:
        """Index of ``name``, creating the state on first use."""
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._index[name] = idx
            self._names.append(name)
            self._prob.append([])
            self._markov.append([])
        return idx

    def has_state(self, name: str) -> bool:
        return name in self._index

    def add_probabilistic(self, s: int, action: str, dist: Distribution | Mapping[int, float]) -> None:
        if not isinstance(dist, Distribution):
            dist = Distribution.of(dist)
        self._prob[s].append((action, dist))

    def add_rate(self, s: int, target: int, rate: float) -> None:
        self._markov[s].append((target, float(rate)))

    def label(self, name: str, s: int) -> None:
        self._labels.setdefault(name, set()).add(s)

    def build(self) -> MarkovAutomaton:
        return MarkovAutomaton(
            num_states=len(self._names),
            initial=self.initial,
            prob_transitions=tuple(tuple(r) for r in self._prob),
            markov_transitions=tuple(tuple(r) for r in self._markov),
            labels={k: frozenset(v) for k, v in self._labels.items()},
            state_names=tuple(self._names),
        )


def close_maximal_progress(ma: MarkovAutomaton) -> MarkovAutomaton:
    """Drop Markovian transitions of every state that enables a tau transition."""
    changed = False
    markov = []
    for s in range(ma.num_states):
        if ma.markov_transitions[s] and any(a == TAU for a, _ in ma.prob_transitions[s]):
            markov.append(())
            changed = True
        else:
            markov.append(ma.markov_transitions[s])
    if not changed:
        return ma
    return replace(ma, markov_transitions=tuple(markov))


def hide_all_actions(ma: MarkovAutomaton) -> MarkovAutomaton:
    prob = tuple(tuple((TAU, mu) for _, mu in row) for row in ma.prob_transitions)
    if prob != ma.prob_transitions:
        ma = replace(ma, prob_transitions=prob)
    return close_maximal_progress(ma)


def complete_deadlocks(ma: MarkovAutomaton) -> tuple[MarkovAutomaton, list[int]]:
    """Give every deadlock state a rate-1 self-loop; return the patched states."""
    dead = [s for s in range(ma.num_states) if not ma.prob_transitions[s] and not ma.markov_transitions[s]]
    if not dead:
        return ma, []
    markov = list(ma.markov_transitions)
    for s in dead:
        markov[s] = ((s, 1.0),)
    return replace(ma, markov_transitions=tuple(markov)), dead


def prepare(ma: MarkovAutomaton) -> tuple[MarkovAutomaton, list[int]]:
    """Normal form used by every objective engine: all-tau, closed, deadlock-free."""
    return complete_deadlocks(hide_all_actions(ma))


def rate_matrix_row(ma: MarkovAutomaton, s: int) -> dict[int, float]:
    """R(s, .) with parallel edges aggregated."""
    row: dict[int, float] = {}
    for t, r in ma.markov_transitions[s]:
        row[t] = row.get(t, 0.0) + r
    return row


def _require_markovian(ma: MarkovAutomaton, s: int) -> None:
    if not ma.is_markovian(s):
        raise ModelError(f"state {ma.name(s)} is not Markovian")


def exit_rate(ma: MarkovAutomaton, s: int) -> float:
    _require_markovian(ma, s)
    return math.fsum(r for _, r in ma.markov_transitions[s])


def embedded_probs(ma: MarkovAutomaton, s: int) -> Distribution:
    _require_markovian(ma, s)
    row = rate_matrix_row(ma, s)
    e = math.fsum(row.values())
    return Distribution(tuple((t, r / e) for t, r in row.items()))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "info"
    code: str
    message: str
    state: int | None = None

    def __str__(self) -> str:
        return f"{self.severity}: {self.code}: {self.message}"


def validate(ma: MarkovAutomaton, notes: bool = False) -> list[Diagnostic]:
    """Report invariant violations.

    Errors and warnings are always returned.  Deadlock states are reported as
    ``info`` notes only when ``notes`` is set: terminal states are legitimate in
    input models and the engines complete them on demand.
    """
    from .graph import zeno_check

    diags: list[Diagnostic] = []
    n = ma.num_states
    if not 0 <= ma.initial < n:
        diags.append(Diagnostic("error", "initial", f"initial state {ma.initial} out of range"))
    structural_ok = True
    for s in range(n):
        for action, mu in ma.prob_transitions[s]:
            seen = set()
            for t, p in mu:
                if not 0 <= t < n:
                    diags.append(Diagnostic("error", "dangling", f"state {ma.name(s)}: target index {t} out of range", s))
                    structural_ok = False
                if not (p > 0 and math.isfinite(p)) or p > 1 + NORMALIZATION_TOL:
                    diags.append(Diagnostic("error", "probability", f"state {ma.name(s)}: invalid probability {p!r}", s))
                if t in seen:
                    diags.append(Diagnostic("error", "duplicate", f"state {ma.name(s)}: duplicate target {t} in {action}", s))
                seen.add(t)
            total = mu.total()
            if abs(total - 1.0) > NORMALIZATION_TOL:
                diags.append(Diagnostic("error", "normalization", f"state {ma.name(s)}: distribution of {action} sums to {total:.12g}", s))
        for t, r in ma.markov_transitions[s]:
            if not 0 <= t < n:
                diags.append(Diagnostic("error", "dangling", f"state {ma.name(s)}: target index {t} out of range", s))
                structural_ok = False
            if not (r > 0 and math.isfinite(r)):
                diags.append(Diagnostic("error", "rate", f"state {ma.name(s)}: non-positive rate {r!r}", s))
        if notes and not ma.prob_transitions[s] and not ma.markov_transitions[s]:
            diags.append(Diagnostic("info", "deadlock", f"state {ma.name(s)} has no transitions; treated as absorbing", s))
    for name, members in ma.labels.items():
        bad = [s for s in members if not 0 <= s < n]
        if bad:
            diags.append(Diagnostic("error", "label", f"label {name!r} references unknown states {bad}"))
    if structural_ok and 0 <= ma.initial < n:
        zeno = zeno_check(close_maximal_progress(ma))
        if zeno:
            names = ", ".join(ma.name(s) for s in sorted(zeno)[:10])
            diags.append(Diagnostic("warning", "zeno", f"reachable probabilistic cycle(s) through {names}"))
    return diags


@dataclass
class ChoiceMatrix:
    """Flat MDP view of a prepared MA.

    Row ``r`` is one choice; rows of state ``s`` occupy
    ``state_ptr[s]:state_ptr[s+1]``.  A Markovian state contributes exactly one
    row (its embedded jump distribution) with ``action[r] == MARKOV_ACTION``.
    """

    n: int
    state_ptr: np.ndarray
    row_state: np.ndarray
    matrix: sp.csr_matrix
    action: list[str]
    markovian: np.ndarray
    exit_rate: np.ndarray
    # index of the row within its state's probabilistic transitions, -1 for Markovian rows
    local_index: np.ndarray

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    def rows_of(self, s: int) -> range:
        return range(int(self.state_ptr[s]), int(self.state_ptr[s + 1]))

    def successors(self, r: int) -> np.ndarray:
        m = self.matrix
        return m.indices[m.indptr[r]:m.indptr[r + 1]]


def choice_matrix(ma: MarkovAutomaton) -> ChoiceMatrix:
    """Build the flat MDP view; ``ma`` must be closed and deadlock-free."""
    n = ma.num_states
    ptr = [0]
    rows, cols, vals = [], [], []
    row_state, action, local = [], [], []
    markovian = np.zeros(n, dtype=bool)
    rates = np.zeros(n)
    r = 0
    for s in range(n):
        if ma.prob_transitions[s]:
            for k, (a, mu) in enumerate(ma.prob_transitions[s]):
                for t, p in mu:
                    rows.append(r)
                    cols.append(t)
                    vals.append(p)
                row_state.append(s)
                action.append(a)
                local.append(k)
                r += 1
        elif ma.markov_transitions[s]:
            row = rate_matrix_row(ma, s)
            e = math.fsum(row.values())
            markovian[s] = True
            rates[s] = e
            for t, rate in row.items():
                rows.append(r)
                cols.append(t)
                vals.append(rate / e)
            row_state.append(s)
            action.append(MARKOV_ACTION)
            local.append(-1)
            r += 1
        else:
            raise ModelError(f"state {ma.name(s)} has no transitions; complete deadlocks first")
        ptr.append(r)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(r, n))
    matrix.sum_duplicates()
    return ChoiceMatrix(
        n=n,
        state_ptr=np.asarray(ptr, dtype=np.int64),
        row_state=np.asarray(row_state, dtype=np.int64),
        matrix=matrix,
        action=action,
        markovian=markovian,
        exit_rate=rates,
        local_index=np.asarray(local, dtype=np.int64),
    )


def reachable_states(ma: MarkovAutomaton, sources: Sequence[int] | None = None) -> set[int]:
    stack = list(sources) if sources is not None else [ma.initial]
    seen = set(stack)
    while stack:
        s = stack.pop()
        for t in ma.successors(s):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen
