import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from maqa.model import GoalSet, MABuilder, MarkovAutomaton, ResourceError, choice_matrix
from maqa.objectives import ReachQuery, TimedQuery, build_dma, choose_delta, digitisation_bound, timed_reachability, unbounded_reachability
from oracles import ma_choices, random_ma


def tbr(ma, goal, direction="max", a=0, b=1, epsilon=1e-3, trace=None):
    q = TimedQuery(goal=GoalSet(frozenset(goal)), direction=direction, a=a, b=b, epsilon=epsilon)
    return timed_reachability(ma, q, trace)


def ur(ma, goal, direction="max"):
    return unbounded_reachability(ma, ReachQuery(goal=GoalSet(frozenset(goal)), direction=direction))


def flip_flop(lam, mu):
    """s0 --lam--> g --mu--> s0"""
    return MarkovAutomaton(2, 0, ((), ()), (((1, lam),), ((0, mu),)))


class TestChooseDelta:
    def test_examples(self):
        d = choose_delta(1.0, 0, 1, 0.5)
        assert d.k_b == 1 and d.bound == pytest.approx(1 - 2 / math.e)
        assert choose_delta(1.0, 0, 1, 1e-3).k_b == 500

    def test_zero_rate(self):
        d = choose_delta(0.0, 0, 3, 1e-6)
        assert (d.k_b, d.bound, d.delta) == (1, 0.0, Fraction(3))

    @pytest.mark.parametrize("seed", range(50))
    def test_minimal(self, seed):
        rng = np.random.default_rng(seed)
        lam = float(rng.uniform(0.1, 20))
        b = float(np.round(rng.uniform(0.1, 3), 2))
        eps = float(10 ** rng.uniform(-4, -1))
        d = choose_delta(lam, 0, b, eps)
        assert d.bound <= eps
        assert d.k_b == 1 or digitisation_bound(lam, b, d.k_b - 1) > eps

    def test_bound_matches_direct_formula(self):
        for lam, b, k in [(2.0, 1.0, 10), (5.0, 0.5, 300), (1.0, 2.0, 7)]:
            direct = 1 - math.exp(-lam * b) * (1 + lam * b / k) ** k
            assert digitisation_bound(lam, b, k) == pytest.approx(direct, rel=1e-9)

    def test_interval_grid(self):
        d = choose_delta(3.0, "0.5", 2, 1e-3)
        assert d.k_b % 4 == 0 and d.k_a * 4 == d.k_b
        assert d.delta * d.k_a == Fraction(1, 2)
        plain = choose_delta(3.0, 0, 2, 1e-3)
        assert plain.k_b <= d.k_b < plain.k_b + 4

    def test_decimal_endpoints_are_exact(self):
        d = choose_delta(1.0, 0.1, 0.3, 1e-2)
        assert d.k_b % 3 == 0 and d.delta * d.k_a == Fraction(1, 10)

    @pytest.mark.parametrize("args", [(1.0, 2, 1, 0.1), (1.0, 0, 0, 0.1), (1.0, 0, 1, 0.0), (1.0, 0, 1, 1.5), (-1.0, 0, 1, 0.1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            choose_delta(*args)

    def test_resource_cap(self):
        with pytest.raises(ResourceError):
            choose_delta(5.0, 0, 10, 1e-9)


def test_dma_kernel():
    ma = random_ma(np.random.default_rng(1), 10)
    cm = choice_matrix(ma)
    delta = 0.01
    dma = build_dma(cm, delta)
    assert np.allclose(np.asarray(dma.matrix.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    P = cm.matrix.toarray()
    D = dma.matrix.toarray()
    for s in range(10):
        r = cm.state_ptr[s]
        if not cm.markovian[s]:
            assert np.array_equal(D[r], P[r])
            continue
        stay = math.exp(-cm.exit_rate[s] * delta)
        want = (1 - stay) * P[r]
        want[s] += stay
        assert D[r] == pytest.approx(want, abs=1e-15)


class TestAnalytic:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
    def test_single_exponential(self, lam):
        ma = MarkovAutomaton(2, 0, ((), ()), (((1, lam),), ()))
        exact = 1 - math.exp(-lam)
        for eps in (1e-2, 1e-3):
            res = tbr(ma, {1}, epsilon=eps)
            assert exact - eps <= res.value <= exact + 1e-12
            assert res.error_bound <= eps

    def test_interval_on_flip_flop(self):
        lam, mu, a, b = 2.0, 1.0, 0.5, 1.5
        ma = flip_flop(lam, mu)
        p0 = mu / (lam + mu) + lam / (lam + mu) * math.exp(-(lam + mu) * a)
        exact = 1 - p0 * math.exp(-lam * (b - a))
        res = tbr(ma, {1}, a=a, b=b, epsilon=1e-3)
        assert res.value == pytest.approx(exact, abs=2e-3)
        assert res.extra["k_a"] * 3 == res.extra["k_b"]

    def test_goal_state_is_one(self):
        ma = flip_flop(1.0, 1.0)
        res = tbr(ma, {0})
        assert res.value == 1.0

    def test_min_note(self):
        res = tbr(flip_flop(1.0, 1.0), {1}, "min")
        assert any("min direction" in n for n in res.notes)


def _traced(ma, goal, direction, eps):
    seen = []
    res = tbr(ma, goal, direction, epsilon=eps, trace=lambda k, v: seen.append(v.copy()))
    return res, seen


@pytest.mark.parametrize("seed", range(200))
def test_trace_monotone_and_bounded(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12))
    ma = random_ma(rng, n, absorbing=0.1)
    goal = set(rng.choice(n, size=2, replace=False).tolist())
    lo, lo_seen = _traced(ma, goal, "min", 0.05)
    hi, hi_seen = _traced(ma, goal, "max", 0.05)
    for seen in (lo_seen, hi_seen):
        assert len(seen) == hi.extra["k_b"] + 1
        prev = seen[0]
        for v in seen:
            assert np.all(v >= -1e-12) and np.all(v <= 1 + 1e-12)
            assert np.all(v >= prev - 1e-9)
            prev = v
    assert np.all(lo.values <= hi.values + 1e-9)
    # time-bounded never exceeds unbounded reachability
    assert np.all(hi.values <= ur(ma, goal, "max").values + 1e-9)
    g = sorted(goal)
    assert np.all(hi.values[g] == 1.0) and np.all(lo.values[g] == 1.0)


@pytest.mark.parametrize("seed", range(20))
def test_epsilon_halving(seed):
    rng = np.random.default_rng(700 + seed)
    ma = random_ma(rng, 8)
    goal = {int(rng.integers(1, 8))}
    for direction in ("min", "max"):
        coarse = tbr(ma, goal, direction, epsilon=0.02)
        fine = tbr(ma, goal, direction, epsilon=0.01)
        assert abs(coarse.value - fine.value) <= 0.02
    fine_max = tbr(ma, goal, "max", epsilon=0.01).value
    assert tbr(ma, goal, "max", epsilon=0.02).value <= fine_max + 1e-9


def _chain_reach(P, goal):
    n = P.shape[0]
    can = set(goal)
    grew = True
    while grew:
        grew = False
        for s in range(n):
            if s not in can and any(P[s, t] > 0 for t in can):
                can.add(s)
                grew = True
    x = np.zeros(n)
    x[list(goal)] = 1.0
    T = sorted(can - set(goal))
    if T:
        A = np.eye(len(T)) - P[np.ix_(T, T)]
        x[T] = np.linalg.solve(A, P[np.ix_(T, sorted(goal))].sum(axis=1))
    return x


def reach_by_enumeration(ma, goal, direction):
    ch = ma_choices(ma)
    n = ma.num_states
    best = None
    for pick in itertools.product(*[range(len(c)) for c in ch]):
        P = np.zeros((n, n))
        for s, k in enumerate(pick):
            if s in goal:
                P[s, s] = 1.0
                continue
            for t, p in ch[s][k][1].items():
                P[s, t] += p
        x = _chain_reach(P, goal)
        best = x if best is None else (np.minimum(best, x) if direction == "min" else np.maximum(best, x))
    return best


class TestUnbounded:
    @pytest.mark.parametrize("seed", range(60))
    def test_against_policy_enumeration(self, seed):
        rng = np.random.default_rng(1100 + seed)
        n = int(rng.integers(3, 9))
        ma = random_ma(rng, n, absorbing=0.3, max_actions=2)
        goal = {int(rng.integers(n))}
        for direction in ("min", "max"):
            got = ur(ma, goal, direction).values
            assert got == pytest.approx(reach_by_enumeration(ma, goal, direction), abs=1e-9)

    def test_initial_in_goal(self):
        assert ur(flip_flop(1.0, 1.0), {0}).value == 1.0

    def test_unreachable(self):
        ma = MarkovAutomaton(3, 0, ((), (), ()), (((1, 1.0),), ((1, 1.0),), ((0, 1.0),)))
        assert ur(ma, {2}).value == 0.0
        assert tbr(ma, {2}).value == 0.0

    def test_policy_labels(self):
        b = MABuilder()
        s0, g, trap = (b.state(x) for x in ("s0", "g", "trap"))
        b.add_probabilistic(s0, "win", {g: 0.9, trap: 0.1})
        b.add_probabilistic(s0, "lose", {g: 0.2, trap: 0.8})
        b.add_rate(g, g, 1.0)
        b.add_rate(trap, trap, 1.0)
        ma = b.build()
        hi = ur(ma, {g}, "max")
        lo = ur(ma, {g}, "min")
        assert (hi.value, hi.policy[0]) == (pytest.approx(0.9), "win")
        assert (lo.value, lo.policy[0]) == (pytest.approx(0.2), "lose")
