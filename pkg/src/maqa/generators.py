"""Direct state-space constructors for the two case-study models.

``gen_queueing`` builds the small two-station queue (capacity one everywhere),
``gen_polling`` the parametric polling system with ordered station queues and
typed jobs.  Both return closed MAs (maximal progress already applied) whose
states are numbered in BFS order from the initial state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .model import MABuilder, MarkovAutomaton, ModelError, TAU

COPY_SUCCESS = 0.9
COPY_FAILURE = 0.1


@dataclass(frozen=True)
class QueueParams:
    l1: float
    l2: float
    mu: float

    def __post_init__(self):
        if min(self.l1, self.l2, self.mu) <= 0:
            raise ModelError("rates must be positive")


@dataclass(frozen=True)
class PollingParams:
    Q: int
    N: int

    def __post_init__(self):
        if self.Q < 1 or self.N < 1:
            raise ModelError("Q and N must be at least 1")

    @staticmethod
    def arrival_rate(i: int) -> float:
        return 2.0 * i + 1.0

    @staticmethod
    def service_rate(j: int) -> float:
        return 2.0 * j


def _explore(initial, step, name, labels_of) -> MarkovAutomaton:
    """BFS over hashable states; ``step`` yields (taus, rates).

    ``taus`` is a list of (action, {succ: prob}); ``rates`` a list of (succ, rate).
    Maximal progress: rates are ignored whenever a tau is enabled.
    """
    b = MABuilder()
    b.initial = b.state(name(initial))
    queue = deque([initial])
    index = {initial: b.initial}
    while queue:
        x = queue.popleft()
        s = index[x]
        for lab in labels_of(x):
            b.label(lab, s)
        taus, rates = step(x)

        def idx(y):
            if y not in index:
                index[y] = b.state(name(y))
                queue.append(y)
            return index[y]

        if taus:
            for action, dist in taus:
                merged: dict[int, float] = {}
                for y, p in dist.items():
                    t = idx(y)
                    merged[t] = merged.get(t, 0.0) + p
                b.add_probabilistic(s, action, merged)
        else:
            for y, rate in rates:
                b.add_rate(s, idx(y), rate)
    return b.build()


def gen_queueing(p: QueueParams) -> MarkovAutomaton:
    """Two stations and one server, each holding at most one job."""
    rate = {1: p.l1, 2: p.l2}

    def step(x):
        s1, s2, j = x
        taus, rates = [], []
        if j == 0:
            for i, si in ((1, s1), (2, s2)):
                if si == 1:
                    moved = (0, s2, 1) if i == 1 else (s1, 0, 1)
                    kept = (s1, s2, 1)
                    taus.append((f"fetch{i}", {moved: COPY_SUCCESS, kept: COPY_FAILURE}))
        if s1 == 0:
            rates.append(((1, s2, j), rate[1]))
        if s2 == 0:
            rates.append(((s1, 1, j), rate[2]))
        if j == 1:
            rates.append(((s1, s2, 0), p.mu))
        return taus, rates

    def labels(x):
        s1, s2, j = x
        return [f"s1_{s1}", f"s2_{s2}", f"j_{j}"]

    return _explore((0, 0, 0), step, lambda x: "q{}{}{}".format(*x), labels)


# server modes
IDLE, BUSY, FINISHING = 0, 1, 2


def gen_polling(p: PollingParams) -> MarkovAutomaton:
    """Polling system with two stations of capacity ``Q`` and ``N`` job types.

    A state is ``(station1, station2, server)``; a station is ``(queue, arriving)``
    where ``queue`` is a tuple of job types (head first) and ``arriving`` marks
    the instant after an arrival delay, in which the job type is chosen
    nondeterministically.  The server is ``(mode, job)``.
    """
    Q, N = p.Q, p.N
    jobs = range(1, N + 1)

    def step(x):
        stations, server = x[:2], x[2]
        taus, rates = [], []
        for i, (queue, arriving) in enumerate(stations, start=1):
            if arriving:
                for j in jobs:
                    taus.append((f"arrive{i}_{j}", {_set(x, i, (queue + (j,), False)): 1.0}))
            elif queue and server[0] == IDLE:
                head = queue[0]
                busy = (BUSY, head)
                moved = _set(x, i, (queue[1:], False), busy)
                kept = _set(x, i, (queue, False), busy)
                taus.append((f"copy{i}", {moved: COPY_SUCCESS, kept: COPY_FAILURE}))
        if server[0] == FINISHING:
            taus.append((f"finish{server[1]}", {(stations[0], stations[1], (IDLE, 0)): 1.0}))
        for i, (queue, arriving) in enumerate(stations, start=1):
            if not arriving and len(queue) < Q:
                rates.append((_set(x, i, (queue, True)), PollingParams.arrival_rate(i)))
        if server[0] == BUSY:
            rates.append(((stations[0], stations[1], (FINISHING, server[1])), PollingParams.service_rate(server[1])))
        return taus, rates

    def labels(x):
        (q1, a1), (q2, a2) = x[0], x[1]
        out = []
        if len(q1) == Q and len(q2) == Q:
            out.append("bothFull")
        if len(q1) == Q:
            out.append("full1")
        if len(q2) == Q:
            out.append("full2")
        if not q1 and not q2:
            out.append("bothEmpty")
        return out

    def name(x):
        (q1, a1), (q2, a2), (mode, j) = x
        st = lambda q, a: "".join(map(str, q)) + ("a" if a else "")
        return f"p_{st(q1, a1)}_{st(q2, a2)}_{'ibf'[mode]}{j}"

    empty = ((), False)
    return _explore((empty, empty, (IDLE, 0)), step, name, labels)


def _set(x, i, station, server=None):
    st = list(x[:2])
    st[i - 1] = station
    return (st[0], st[1], x[2] if server is None else server)


def all_tau(ma: MarkovAutomaton) -> bool:
    return all(a == TAU for row in ma.prob_transitions for a, _ in row)
