"""Generalised stochastic Petri nets and their Markov automaton semantics.

Text format, one declaration per line (``#`` starts a comment)::

    bound 1
    place p1 1
    immediate t1 - ; p1 ; p3          # unweighted: nondeterministic
    immediate t2 2.5 ; p2 ; p5        # weighted
    timed l1 0.75 ; p4 ; p6

Input and output place lists are whitespace separated; repeat a place to
put a multiplicity on its arc.  Either list may be empty.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field

from .io import IDENT, NUMBER, ParseError
from .model import TAU, Distribution, MABuilder, MarkovAutomaton, ModelError, ResourceError

DEFAULT_BOUND = 1
DEFAULT_STATE_LIMIT = 1_000_000


@dataclass(frozen=True)
class Transition:
    name: str
    timed: bool
    # rate for timed transitions, weight (or None) for immediate ones
    value: float | None
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]

    @property
    def weighted(self) -> bool:
        return not self.timed and self.value is not None


@dataclass
class GspnNet:
    places: list[str] = field(default_factory=list)
    initial: list[int] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    bound: int = DEFAULT_BOUND

    @property
    def immediate(self) -> list[Transition]:
        return [t for t in self.transitions if not t.timed]

    @property
    def timed(self) -> list[Transition]:
        return [t for t in self.transitions if t.timed]


def _positive(text: str, line: int, col: int, what: str) -> float:
    if not NUMBER.match(text):
        raise ParseError(f"invalid {what} {text!r}", line, col)
    x = float(text)
    if not (x > 0 and math.isfinite(x)):
        raise ParseError(f"{what} must be positive, got {text}", line, col)
    return x


def parse_gspn(text: str) -> GspnNet:
    net = GspnNet()
    index: dict[str, int] = {}
    names: set[str] = set()
    pending: list[tuple[str, bool, float | None, list[tuple[str, int]], list[tuple[str, int]], int, int]] = []
    bound_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        words = [(m.group(), m.start() + 1) for m in re.finditer(r"[^\s;]+|;", body)]
        kw, kcol = words[0]
        if kw == "place":
            if len(words) != 3:
                raise ParseError("expected 'place <name> <tokens>'", lineno, kcol)
            (name, ncol), (tok, tcol) = words[1], words[2]
            if not IDENT.match(name):
                raise ParseError(f"invalid place name {name!r}", lineno, ncol)
            if name in index:
                raise ParseError(f"duplicate place {name!r}", lineno, ncol)
            if not tok.isdigit():
                raise ParseError(f"token count must be a non-negative integer, got {tok!r}", lineno, tcol)
            index[name] = len(net.places)
            net.places.append(name)
            net.initial.append(int(tok))
        elif kw == "bound":
            if len(words) != 2 or not words[1][0].isdigit() or int(words[1][0]) < 1:
                raise ParseError("expected 'bound <positive integer>'", lineno, kcol)
            if bound_seen:
                raise ParseError("duplicate bound declaration", lineno, kcol)
            bound_seen = True
            net.bound = int(words[1][0])
        elif kw in ("timed", "immediate"):
            seps = [i for i, (w, _) in enumerate(words) if w == ";"]
            if len(seps) != 2 or seps[0] != 3:
                raise ParseError(f"expected '{kw} <name> <{'rate' if kw == 'timed' else 'weight|-'}> ; <inputs> ; <outputs>'", lineno, kcol)
            (name, ncol), (val, vcol) = words[1], words[2]
            if not IDENT.match(name):
                raise ParseError(f"invalid transition name {name!r}", lineno, ncol)
            if name in names:
                raise ParseError(f"duplicate transition {name!r}", lineno, ncol)
            names.add(name)
            if kw == "timed":
                value = _positive(val, lineno, vcol, "rate")
            else:
                value = None if val == "-" else _positive(val, lineno, vcol, "weight")
            ins = words[seps[0] + 1:seps[1]]
            outs = words[seps[1] + 1:]
            pending.append((name, kw == "timed", value, ins, outs, lineno, kcol))
        else:
            raise ParseError(f"unknown declaration {kw!r}", lineno, kcol)
    for name, timed, value, ins, outs, lineno, _ in pending:
        arcs = []
        for group in (ins, outs):
            idx = []
            for p, col in group:
                if p not in index:
                    raise ParseError(f"transition {name} refers to undeclared place {p!r}", lineno, col)
                idx.append(index[p])
            arcs.append(tuple(sorted(idx)))
        net.transitions.append(Transition(name, timed, value, arcs[0], arcs[1]))
    if not net.places:
        raise ParseError("net declares no places")
    for p, k in zip(net.places, net.initial):
        if k > net.bound:
            raise ModelError(f"initial marking of {p} ({k}) exceeds the token bound {net.bound}")
    return net


Marking = tuple[int, ...]


def _enabled(t: Transition, m: Marking) -> bool:
    need: dict[int, int] = {}
    for p in t.inputs:
        need[p] = need.get(p, 0) + 1
    return all(m[p] >= k for p, k in need.items())


def _fire(net: GspnNet, t: Transition, m: Marking, bound: int) -> Marking:
    out = list(m)
    for p in t.inputs:
        out[p] -= 1
    for p in t.outputs:
        out[p] += 1
    for p, k in enumerate(out):
        if k > bound:
            raise ModelError(f"firing {t.name} in marking {{{marking_label(net, m)}}} puts {k} tokens on {net.places[p]} (bound {bound})")
    return tuple(out)


def marking_label(net: GspnNet, m: Marking) -> str:
    parts = [p if k == 1 else f"{p}:{k}" for p, k in zip(net.places, m) if k]
    return ",".join(parts) if parts else "empty"


def marking_name(net: GspnNet, m: Marking) -> str:
    parts = [p if k == 1 else f"{p}x{k}" for p, k in zip(net.places, m) if k]
    return "s_" + ("_".join(parts) if parts else "empty")


def build_ma(net: GspnNet, bound: int | None = None, state_limit: int = DEFAULT_STATE_LIMIT) -> tuple[MarkovAutomaton, dict[str, frozenset[int]]]:
    """Breadth-first reachability graph of ``net`` as a Markov automaton.

    In a vanishing marking all enabled weighted immediates share one
    tau distribution (weights normalised) and every enabled unweighted
    immediate is a separate tau alternative; timed transitions only fire in
    tangible markings.  Every state is labelled with its marked places.
    """
    if state_limit < 1:
        raise ValueError("state_limit must be positive")
    bound = net.bound if bound is None else bound
    if bound < 1:
        raise ValueError("bound must be positive")
    init = tuple(net.initial)
    if max(init, default=0) > bound:
        raise ModelError(f"initial marking exceeds the token bound {bound}")
    b = MABuilder()
    queue: deque[Marking] = deque()

    def visit(m: Marking) -> int:
        name = marking_name(net, m)
        if not b.has_state(name):
            if len(b) >= state_limit:
                raise ResourceError(f"state limit {state_limit} exceeded")
            s = b.state(name)
            b.label(marking_label(net, m), s)
            queue.append(m)
            return s
        return b.state(name)

    b.initial = visit(init)
    while queue:
        m = queue.popleft()
        s = b.state(marking_name(net, m))
        imm = [t for t in net.immediate if _enabled(t, m)]
        if imm:
            weighted = [t for t in imm if t.weighted]
            for t in imm:
                if not t.weighted:
                    b.add_probabilistic(s, TAU, Distribution.dirac(visit(_fire(net, t, m, bound))))
            if weighted:
                total = math.fsum(t.value for t in weighted)
                branches = [(visit(_fire(net, t, m, bound)), t.value / total) for t in weighted]
                b.add_probabilistic(s, TAU, Distribution.of(branches))
        else:
            for t in net.timed:
                if _enabled(t, m):
                    b.add_rate(s, visit(_fire(net, t, m, bound)), t.value)
    ma = b.build()
    return ma, dict(ma.labels)


CONFUSED_NET_TEMPLATE = """\
# confused net: t1 and t2 are concurrent, firing t1 first makes t2 and t3 conflict
place p1 1
place p2 1
place p3 0
place p4 0
place p5 0
place p6 0
place p7 0
immediate t1 - ; p1 ; p3
immediate t2 {w2} ; p2 ; p5
immediate t3 {w3} ; p2 p3 ; p4
timed l1 {l1} ; p4 ; p6
timed l2 {l2} ; p3 p5 ; p3 p7
"""


def confused_net_text(w2: float = 1.0, w3: float = 3.0, l1: float = 1.0, l2: float = 1.0) -> str:
    return CONFUSED_NET_TEMPLATE.format(w2=repr(float(w2)), w3=repr(float(w3)), l1=repr(float(l1)), l2=repr(float(l2)))
