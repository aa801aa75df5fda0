import itertools
import math

import numpy as np
import pytest

from maqa.model import TAU, Distribution, GoalSet, MABuilder, MarkovAutomaton
from maqa.objectives import ExpectedTimeQuery, ZenoError, expected_time
from oracles import et_bellman_residual, ma_choices, random_ma


def alpha_beta():
    """Initial choice between a rate-4 and a rate-1 state, both leading to the goal."""
    b = MABuilder()
    s0, fast, slow, g = (b.state(x) for x in ("s0", "fast", "slow", "g"))
    b.add_probabilistic(s0, "alpha", {fast: 1.0})
    b.add_probabilistic(s0, "beta", {slow: 1.0})
    b.add_rate(fast, g, 4.0)
    b.add_rate(slow, g, 1.0)
    b.label("goal", g)
    return b.build()


def et(ma, goal, direction="min", **kw):
    return expected_time(ma, ExpectedTimeQuery(goal=GoalSet(frozenset(goal)), direction=direction, **kw))


def test_single_rate():
    ma = MarkovAutomaton(2, 0, ((), ()), (((1, 2.0),), ()))
    assert et(ma, {1}).value == pytest.approx(0.5)


@pytest.mark.parametrize("engine", ["vi", "lp"])
def test_alpha_beta(engine):
    ma = alpha_beta()
    lo = et(ma, {3}, "min", engine=engine)
    hi = et(ma, {3}, "max", engine=engine)
    assert lo.value == pytest.approx(0.25) and hi.value == pytest.approx(1.0)
    assert lo.policy[0] == "alpha" and hi.policy[0] == "beta"


def test_goal_value_zero_and_empty_goal():
    ma = alpha_beta()
    assert et(ma, {0}).value == 0.0
    res = et(ma, set())
    assert math.isinf(res.value) and res.notes


def test_unreachable_goal_is_infinite():
    # s1 is absorbing, the goal is never reached from there
    ma = MarkovAutomaton(3, 0, ((), (), ()), (((1, 1.0), (2, 1.0)), ((1, 1.0),), ()))
    res = et(ma, {2})
    assert math.isinf(res.value) and math.isinf(res.values[1]) and res.values[2] == 0.0


def test_max_infinite_if_some_scheduler_avoids():
    b = MABuilder()
    s0, trap, g = (b.state(x) for x in ("s0", "trap", "g"))
    b.add_probabilistic(s0, "go", {g: 1.0})
    b.add_probabilistic(s0, "stay", {trap: 1.0})
    b.add_rate(trap, trap, 1.0)
    ma = b.build()
    assert et(ma, {g}, "min").value == 0.0
    assert math.isinf(et(ma, {g}, "max").value)


def test_zeno_region_rejected():
    ma = MarkovAutomaton(
        3, 0,
        ((), ((TAU, Distribution.dirac(1)), (TAU, Distribution.dirac(2))), ()),
        (((1, 1.0),), (), ()),
    )
    # max may loop in zero time inside the finite region of min
    with pytest.raises(ZenoError):
        et(ma, {2}, "min")


def test_rejects_unknown_engine():
    with pytest.raises(ValueError):
        et(alpha_beta(), {3}, engine="mc")


def _chain_reach(P, goal):
    """Exact absorption probabilities into ``goal`` of a finite Markov chain."""
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
        G = sorted(goal)
        A = np.eye(len(T)) - P[np.ix_(T, T)]
        x[T] = np.linalg.solve(A, P[np.ix_(T, G)].sum(axis=1))
    return x


def _finite_oracle(ma, goal, direction):
    """Finite iff the goal is reached almost surely under some (min) or every
    (max) memoryless deterministic scheduler."""
    ch = ma_choices(ma)
    n = ma.num_states
    out = np.zeros(n, dtype=bool) if direction == "min" else np.ones(n, dtype=bool)
    for pick in itertools.product(*[range(len(c)) for c in ch]):
        P = np.zeros((n, n))
        for s, k in enumerate(pick):
            if s in goal:
                P[s, s] = 1.0
                continue
            for t, p in ch[s][k][1].items():
                P[s, t] += p
        sure = _chain_reach(P, goal) > 1 - 1e-9
        out = out | sure if direction == "min" else out & sure
    return out


@pytest.mark.parametrize("seed", range(200))
def test_bellman_fixpoint(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 15))
    ma = random_ma(rng, n, absorbing=0.15)
    goal = set(rng.choice(n, size=int(rng.integers(1, 3)), replace=False).tolist())
    for direction in ("min", "max"):
        res = et(ma, goal, direction, tol=1e-12)
        finite = np.isfinite(res.values)
        assert np.array_equal(finite, _finite_oracle(ma, goal, direction))
        scale = max(1.0, float(np.max(res.values[finite])))
        assert et_bellman_residual(ma, goal, res.values, direction) <= 1e-7 * scale
        # every chosen choice stays inside the finite region
        for s, label in res.policy.items():
            assert finite[s]


@pytest.mark.parametrize("seed", range(40))
def test_vi_agrees_with_lp(seed):
    rng = np.random.default_rng(1000 + seed)
    ma = random_ma(rng, 12, absorbing=0.1)
    goal = {int(rng.integers(12))}
    for direction in ("min", "max"):
        a = et(ma, goal, direction, engine="vi", tol=1e-12).values
        b = et(ma, goal, direction, engine="lp").values
        assert np.array_equal(np.isinf(a), np.isinf(b))
        fin = np.isfinite(a)
        assert a[fin] == pytest.approx(b[fin], rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("seed", range(30))
def test_rate_scaling(seed):
    rng = np.random.default_rng(2000 + seed)
    ma = random_ma(rng, 10)
    kappa = float(rng.uniform(0.5, 4))
    scaled = MarkovAutomaton(ma.num_states, ma.initial, ma.prob_transitions,
                             tuple(tuple((t, r * kappa) for t, r in row) for row in ma.markov_transitions))
    goal = {int(rng.integers(1, 10))}
    for direction in ("min", "max"):
        a = et(ma, goal, direction, tol=1e-12).values
        b = et(scaled, goal, direction, tol=1e-12).values
        fin = np.isfinite(a)
        assert np.array_equal(fin, np.isfinite(b))
        assert b[fin] == pytest.approx(a[fin] / kappa, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("seed", range(30))
def test_min_below_max(seed):
    rng = np.random.default_rng(3000 + seed)
    ma = random_ma(rng, 10, max_actions=3)
    goal = {0}
    lo = et(ma, goal, "min").values
    hi = et(ma, goal, "max").values
    assert np.all(lo <= hi + 1e-7)


def test_result_metadata():
    res = et(alpha_beta(), {3})
    assert res.objective == "et" and res.states == 4 and res.goal_states == 1
    assert res.state_names == ("s0", "fast", "slow", "g")
    assert res.extra["engine"] == "vi"
