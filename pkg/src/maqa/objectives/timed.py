"""Time-bounded reachability by digitisation, and untimed reachability."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .. import graph
from ..model import ChoiceMatrix, GoalSet, MarkovAutomaton, ResourceError, choice_matrix
from ..numeric import ReachPlan, mdp_reach
from ..result import AnalysisResult
from .common import as_goal, check_direction, policy_labels, prepared

MAX_STEPS = 10**8


def exact(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float literal.

    Floats are read through their shortest repr, so ``0.1`` means 1/10.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"interval endpoint must be finite, got {x}")
        return Fraction(Decimal(repr(x)))
    try:
        return Fraction(Decimal(str(x).strip()))
    except Exception as exc:
        raise ValueError(f"not a decimal number: {x!r}") from exc


def digitisation_bound(lam: float, b: float, k: int) -> float:
    """1 - e^{-lam b} (1 + lam b/k)^k, evaluated without cancellation."""
    if lam == 0.0:
        return 0.0
    x = lam * b
    return float(-math.expm1(-x + k * math.log1p(x / k)))


@dataclass(frozen=True)
class Digitisation:
    delta: Fraction
    k_a: int
    k_b: int
    lam: float
    bound: float

    @property
    def step(self) -> float:
        return float(self.delta)


def choose_delta(lam: float, a, b, epsilon: float) -> Digitisation:
    """Smallest step count k_b meeting the digitisation error bound, rounded up
    so that a is a whole number of steps."""
    a, b = exact(a), exact(b)
    if not 0 <= a <= b or b <= 0:
        raise ValueError(f"need 0 <= a <= b and b > 0, got [{a}, {b}]")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if lam < 0:
        raise ValueError("maximal exit rate must be non-negative")
    grid = (a / b).denominator if a > 0 else 1
    bf = float(b)
    if lam == 0:
        k = 1
    else:
        ok = lambda m: digitisation_bound(lam, bf, m) <= epsilon  # noqa: E731
        seed = max(1, math.ceil(lam * lam * bf * bf / (2 * epsilon)))
        if seed > 4 * MAX_STEPS:
            raise ResourceError(f"accuracy {epsilon:g} needs about {seed} digitisation steps (cap {MAX_STEPS})")
        if ok(seed):
            hi = seed
            lo = seed // 2
            while lo >= 1 and ok(lo):
                hi, lo = lo, lo // 2
        else:
            lo, hi = seed, seed * 2
            while not ok(hi):
                if hi > 4 * MAX_STEPS:
                    raise ResourceError(f"accuracy {epsilon:g} not reachable within {MAX_STEPS} digitisation steps")
                lo, hi = hi, hi * 2
        # invariant: ok(hi), not ok(lo) (or lo == 0)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        k = hi
    k = -(-k // grid) * grid
    if k > MAX_STEPS:
        raise ResourceError(f"{k} digitisation steps exceed the cap of {MAX_STEPS}")
    delta = b / k
    return Digitisation(delta, int(a / delta), k, float(lam), digitisation_bound(lam, bf, k))


def build_dma(cm: ChoiceMatrix, delta: float) -> ChoiceMatrix:
    """Replace each Markovian row by its one-step kernel over ``delta`` time."""
    stay = np.ones(cm.num_rows)
    ms = cm.markovian[cm.row_state]
    stay[ms] = np.exp(-cm.exit_rate[cm.row_state[ms]] * delta)
    scale = np.where(ms, 1.0 - stay, 1.0)
    M = sp.diags(scale) @ cm.matrix
    loops = sp.csr_matrix((stay[ms], (np.flatnonzero(ms), cm.row_state[ms])), shape=M.shape)
    M = sp.csr_matrix(M + loops)
    M.sum_duplicates()
    return replace(cm, matrix=M)


@dataclass
class TimedQuery:
    goal: GoalSet
    direction: str = "max"
    a: object = 0
    b: object = 1
    epsilon: float = 1e-3
    notes: list[str] = field(default_factory=list)


def _markov_rows(cm: ChoiceMatrix, dma: ChoiceMatrix, states: np.ndarray) -> sp.csr_matrix:
    return dma.matrix[cm.state_ptr[states]]


def timed_reachability(ma: MarkovAutomaton, query: TimedQuery, trace: Callable[[int, np.ndarray], None] | None = None) -> AnalysisResult:
    """Optimal probability to visit the goal set within the time interval [a, b].

    ``trace(step, v)`` sees the value vector after every full step (step 0 is
    the initial closure); it must not modify ``v``.
    """
    check_direction(query.direction)
    t0 = time.perf_counter()
    n = ma.num_states
    goal = as_goal(query.goal, n)
    notes = list(query.notes)
    pm = prepared(ma, notes)
    if graph.zeno_check(pm):
        notes.append("model has reachable probabilistic cycles; they take no time")
    cm = choice_matrix(pm)
    lam = float(cm.exit_rate.max(initial=0.0))
    dig = choose_delta(lam, query.a, query.b, query.epsilon)
    dma = build_dma(cm, dig.step)
    G = goal.mask(n)
    ps = ~cm.markovian
    ms = cm.markovian
    inner_tol = query.epsilon / (10 * dig.k_b)

    # stage 1: goal absorbing, horizon k_b - k_a steps
    free1 = ps & ~G
    plan1 = ReachPlan(cm.state_ptr, dma.matrix, free1, query.direction)
    ms1 = np.flatnonzero(ms & ~G)
    K1 = _markov_rows(cm, dma, ms1)
    v = G.astype(float)
    plan1.evaluate(v, inner_tol)
    step = 0
    if trace:
        trace(step, v)
    for _ in range(dig.k_b - dig.k_a):
        v[ms1] = K1 @ v
        plan1.evaluate(v, inner_tol)
        step += 1
        if trace:
            trace(step, v)
    # stage 2: goal carries no value of its own, k_a steps of plain propagation
    if dig.k_a:
        plan2 = ReachPlan(cm.state_ptr, dma.matrix, ps, query.direction)
        ms2 = np.flatnonzero(ms)
        K2 = _markov_rows(cm, dma, ms2)
        for _ in range(dig.k_a):
            v[ms2] = K2 @ v
            plan2.evaluate(v, inner_tol)
            step += 1
            if trace:
                trace(step, v)
    if query.direction == "min":
        notes.append("error bound for the min direction uses the max-direction formula")
    return AnalysisResult(
        objective="tbr",
        direction=query.direction,
        value=float(v[ma.initial]),
        values=v.copy(),
        error_bound=dig.bound,
        epsilon=query.epsilon,
        time_s=time.perf_counter() - t0,
        states=n,
        goal_states=len(goal),
        transitions=ma.num_transitions(),
        state_names=ma.names(),
        notes=notes,
        extra={"delta": dig.step, "k_a": dig.k_a, "k_b": dig.k_b, "lambda": lam, "interval": f"[{exact(query.a)}, {exact(query.b)}]"},
    )


@dataclass
class ReachQuery:
    goal: GoalSet
    direction: str = "max"
    tol: float = 1e-12
    notes: list[str] = field(default_factory=list)


def reach_zero_one(ma: MarkovAutomaton, goal: set[int], direction: str) -> tuple[set[int], set[int]]:
    """States with optimal reachability probability 0 and 1."""
    if direction == "max":
        zero = set(range(ma.num_states)) - graph.can_reach(ma, goal)
        one = graph.almost_sure_reach_exists(ma, goal)
    else:
        zero = graph.avoid_forever_exists(ma, goal)
        one = graph.almost_sure_reach_forall(ma, goal)
    return zero, one


def unbounded_reachability(ma: MarkovAutomaton, query: ReachQuery) -> AnalysisResult:
    check_direction(query.direction)
    t0 = time.perf_counter()
    n = ma.num_states
    goal = as_goal(query.goal, n)
    notes = list(query.notes)
    pm = prepared(ma, notes)
    cm = choice_matrix(pm)
    G = set(goal.members)
    zero, one = reach_zero_one(pm, G, query.direction)
    terminal = np.zeros(n, dtype=bool)
    fixed = np.zeros(n)
    for s in zero:
        terminal[s] = True
    for s in one | G:
        terminal[s] = True
        fixed[s] = 1.0
    vv = mdp_reach(cm.state_ptr, cm.matrix, terminal, fixed, query.direction, query.tol)
    values = np.clip(vv.values, 0.0, 1.0)
    policy = policy_labels(ma, cm, vv.policy, np.flatnonzero(~terminal))
    return AnalysisResult(
        objective="ur",
        direction=query.direction,
        value=float(values[ma.initial]),
        values=values,
        tol=query.tol,
        policy=policy,
        time_s=time.perf_counter() - t0,
        states=n,
        goal_states=len(goal),
        transitions=ma.num_transitions(),
        state_names=ma.names(),
        notes=notes,
        extra={"prob0_states": len(zero), "prob1_states": len(one | G)},
    )
