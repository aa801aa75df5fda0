"""Reader and writer for the explicit-state ``.ma`` text format.

A document has the sections ``#INITIAL``, ``#GOALS`` (optional) and
``#TRANSITIONS``.  A transition block starts with ``<state> <action>`` and is
followed by ``* <target> <value>`` branch lines; the action ``!`` marks a
block of Markovian rates.  ``;`` starts a comment.

Two comment pragmas are understood on top of the plain format:

``;@states a b c``
    fixes the index order of the named states (and declares states that
    never appear otherwise); may be repeated, names are appended.
``;@label name a b``
    attaches an extra label to states; repeated lines for one name merge.
    The name ``goal`` is reserved for the #GOALS section.

Plain readers ignore both, so written documents stay valid for them.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .model import TAU, Distribution, GoalSet, MarkovAutomaton, ModelError

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
MARKOV_BLOCK = "!"
GOAL_LABEL = "goal"
SECTIONS = ("#INITIAL", "#GOALS", "#TRANSITIONS")
NAMES_PER_PRAGMA = 12


class ParseError(ModelError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokens(body: str, lineno: int) -> list[_Tok]:
    return [_Tok(m.group(), lineno, m.start() + 1) for m in re.finditer(r"\S+", body)]


def _ident(tok: _Tok, what: str = "state") -> str:
    if not IDENT.match(tok.text):
        raise ParseError(f"invalid {what} identifier {tok.text!r}", tok.line, tok.col)
    return tok.text


def _number(tok: _Tok) -> float:
    if not NUMBER.match(tok.text):
        raise ParseError(f"invalid number {tok.text!r}", tok.line, tok.col)
    x = float(tok.text)
    if not math.isfinite(x):
        raise ParseError(f"number out of range {tok.text!r}", tok.line, tok.col)
    return x


def parse_ma(text: str) -> tuple[MarkovAutomaton, GoalSet]:
    """Parse a ``.ma`` document; ``#GOALS`` becomes the label ``goal``."""
    if text.startswith("﻿"):
        text = text[1:]
    order: list[str] = []
    seen: set[str] = set()
    pragma_order: list[str] = []
    pragma_labels: dict[str, list[_Tok]] = {}

    def declare(name: str) -> None:
        if name not in seen:
            seen.add(name)
            order.append(name)

    section = None
    visited: list[str] = []
    initial: _Tok | None = None
    goals: list[_Tok] = []
    # (state token, action token, [(target token, value token)])
    blocks: list[tuple[_Tok, _Tok, list[tuple[_Tok, _Tok]]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, _, comment = raw.partition(";")
        if comment.startswith("@"):
            toks = _tokens(comment, lineno)
            for t in toks:
                t.col += len(body) + 1
            head = toks[0].text if toks else ""
            if head == "@states":
                for t in toks[1:]:
                    pragma_order.append(_ident(t))
            elif head == "@label":
                if len(toks) < 2:
                    raise ParseError("label pragma needs a name", lineno, len(body) + 1)
                if "|" in toks[1].text:
                    raise ParseError("label names must not contain '|'", toks[1].line, toks[1].col)
                if toks[1].text == GOAL_LABEL:
                    raise ParseError(f"label '{GOAL_LABEL}' is reserved for the #GOALS section", toks[1].line, toks[1].col)
                pragma_labels.setdefault(toks[1].text, []).extend(toks[2:])
        toks = _tokens(body, lineno)
        if not toks:
            continue
        first = toks[0]
        if first.text.startswith("#"):
            if first.text not in SECTIONS:
                raise ParseError(f"unknown section {first.text!r}", first.line, first.col)
            if len(toks) > 1:
                raise ParseError("unexpected text after section header", toks[1].line, toks[1].col)
            if first.text in visited:
                raise ParseError(f"duplicate {first.text} section", first.line, first.col)
            if visited and SECTIONS.index(first.text) < SECTIONS.index(visited[-1]):
                raise ParseError(f"section {first.text} out of order", first.line, first.col)
            if not visited and first.text != "#INITIAL":
                raise ParseError("document must start with #INITIAL", first.line, first.col)
            visited.append(first.text)
            section = first.text
            continue
        if section is None:
            raise ParseError("content before the #INITIAL section", first.line, first.col)
        if section == "#INITIAL":
            for t in toks:
                if initial is not None:
                    raise ParseError("duplicate initial state", t.line, t.col)
                initial = t
                declare(_ident(t))
        elif section == "#GOALS":
            for t in toks:
                declare(_ident(t))
                goals.append(t)
        else:
            if first.text == "*":
                if not blocks:
                    raise ParseError("branch line outside a transition block", first.line, first.col)
                if len(toks) != 3:
                    col = toks[min(len(toks), 3) - 1].col if len(toks) > 3 else first.col
                    raise ParseError("branch line must be '* <state> <value>'", first.line, col)
                declare(_ident(toks[1]))
                blocks[-1][2].append((toks[1], toks[2]))
            else:
                if len(toks) != 2:
                    raise ParseError("block header must be '<state> <action>'", first.line, first.col)
                declare(_ident(first))
                if toks[1].text != MARKOV_BLOCK:
                    _ident(toks[1], "action")
                blocks.append((first, toks[1], []))
    if initial is None:
        raise ParseError("missing initial state" if "#INITIAL" in visited else "missing #INITIAL section")
    if "#TRANSITIONS" not in visited:
        raise ParseError("missing #TRANSITIONS section")

    for name, toks in pragma_labels.items():
        for t in toks:
            _ident(t)
    index: dict[str, int] = {}
    for name in pragma_order:
        if name in index:
            continue
        index[name] = len(index)
    for name in order:
        if name not in index:
            index[name] = len(index)
    for toks in pragma_labels.values():
        for t in toks:
            if t.text not in index:
                raise ParseError(f"label refers to undeclared state {t.text!r}", t.line, t.col)
    n = len(index)
    names = [""] * n
    for name, i in index.items():
        names[i] = name
    prob: list[list] = [[] for _ in range(n)]
    markov: list[list] = [[] for _ in range(n)]
    for head, action, branches in blocks:
        s = index[head.text]
        if not branches:
            raise ParseError("transition block without branches", head.line, head.col)
        if action.text == MARKOV_BLOCK:
            for target, value in branches:
                rate = _number(value)
                if rate <= 0:
                    raise ParseError(f"non-positive rate {value.text}", value.line, value.col)
                markov[s].append((index[target.text], rate))
        else:
            pairs = []
            for target, value in branches:
                p = _number(value)
                if not 0 <= p <= 1:
                    raise ParseError(f"probability {value.text} outside [0, 1]", value.line, value.col)
                pairs.append((index[target.text], p))
            try:
                mu = Distribution.of(pairs)
            except ModelError as exc:
                raise ParseError(str(exc), head.line, head.col) from None
            prob[s].append((action.text, mu))
    goal = frozenset(index[t.text] for t in goals)
    labels = {name: frozenset(index[t.text] for t in toks) for name, toks in pragma_labels.items()}
    labels[GOAL_LABEL] = goal
    ma = MarkovAutomaton(
        num_states=n,
        initial=index[initial.text],
        prob_transitions=tuple(tuple(r) for r in prob),
        markov_transitions=tuple(tuple(r) for r in markov),
        labels=labels,
        state_names=tuple(names),
    )
    return ma, GoalSet(goal, GOAL_LABEL)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _check_names(ma: MarkovAutomaton) -> list[str]:
    names = list(ma.names())
    if len(set(names)) != len(names):
        raise ModelError("state names are not unique")
    for nm in names:
        if not IDENT.match(nm):
            raise ModelError(f"state name {nm!r} is not a valid identifier")
    return names


def write_ma(ma: MarkovAutomaton, goal: GoalSet | None = None) -> str:
    """Canonical document for ``ma``; ``goal`` defaults to the ``goal`` label."""
    names = _check_names(ma)
    if goal is None:
        members = ma.labels.get(GOAL_LABEL, frozenset())
    else:
        members = goal.members
    body = ["#INITIAL", names[ma.initial], "#GOALS"]
    body.extend(names[s] for s in sorted(members))
    body.append("#TRANSITIONS")
    appearance = [ma.initial, *sorted(members)]
    for s in range(ma.num_states):
        for action, mu in ma.prob_transitions[s]:
            if action != TAU and not IDENT.match(action):
                raise ModelError(f"action label {action!r} is not a valid identifier")
            body.append(f"{names[s]} {action}")
            appearance.append(s)
            for t, p in sorted(mu.entries, key=lambda e: e[0]):
                body.append(f"* {names[t]} {_fmt(p)}")
                appearance.append(t)
        if ma.markov_transitions[s]:
            body.append(f"{names[s]} {MARKOV_BLOCK}")
            appearance.append(s)
            for t, r in sorted(ma.markov_transitions[s], key=lambda e: e[0]):
                body.append(f"* {names[t]} {_fmt(r)}")
                appearance.append(t)
    first: list[int] = []
    met: set[int] = set()
    for s in appearance:
        if s not in met:
            met.add(s)
            first.append(s)
    head: list[str] = []
    if first != list(range(ma.num_states)):
        for i in range(0, len(names), NAMES_PER_PRAGMA):
            head.append(";@states " + " ".join(names[i:i + NAMES_PER_PRAGMA]))
    for label in sorted(ma.labels):
        if label == GOAL_LABEL:
            continue
        if any(c.isspace() for c in label) or "|" in label or not label:
            raise ModelError(f"label name {label!r} cannot be written")
        ids = [names[s] for s in sorted(ma.labels[label])]
        if not ids:
            head.append(f";@label {label}")
        for i in range(0, len(ids), NAMES_PER_PRAGMA):
            head.append(f";@label {label} " + " ".join(ids[i:i + NAMES_PER_PRAGMA]))
    return "\n".join(head + body) + "\n"


def resolve_goal(ma: MarkovAutomaton, expr: str) -> GoalSet:
    """Union of the labels named in ``expr`` (``l1|l2|...``)."""
    parts = [p.strip() for p in expr.split("|")]
    if not expr.strip() or any(not p for p in parts):
        raise ModelError(f"malformed goal expression {expr!r}")
    members: set[int] = set()
    for p in parts:
        if p not in ma.labels:
            known = ", ".join(sorted(ma.labels)) or "none"
            raise ModelError(f"unknown label {p!r} (known: {known})")
        members |= ma.labels[p]
    return GoalSet(frozenset(members), expr.strip())
