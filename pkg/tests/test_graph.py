import numpy as np
import pytest

from maqa import graph
from maqa.generators import PollingParams, gen_polling
from maqa.model import TAU, Distribution, MarkovAutomaton
from oracles import brute_force_mecs, closure_sccs, mdp_to_ma, random_mdp, reach_prob_vi


def chain(n, loop_last=True):
    markov = [((i + 1, 1.0),) for i in range(n - 1)] + [((n - 1, 1.0),) if loop_last else ()]
    return MarkovAutomaton(n, 0, ((),) * n, tuple(markov))


def mixed_ma(rng, n):
    """Random MA with both kinds of states, probabilistic cycles allowed."""
    prob, markov = [], []
    for _ in range(n):
        if rng.random() < 0.5:
            acts = []
            for _ in range(int(rng.integers(1, 3))):
                k = int(rng.integers(1, 3))
                ts = rng.choice(n, size=k, replace=False)
                acts.append((TAU, Distribution.of({int(t): 1.0 / k for t in ts})))
            prob.append(tuple(acts))
            markov.append(())
        else:
            k = int(rng.integers(1, 3))
            prob.append(())
            markov.append(tuple((int(t), 1.0) for t in rng.choice(n, size=k, replace=False)))
    return MarkovAutomaton(n, 0, tuple(prob), tuple(markov))


class TestScc:
    def test_cycle(self):
        adj = [[1], [2], [0]]
        assert graph.tarjan(adj) == [[0, 1, 2]]

    def test_dag_reverse_topological(self):
        adj = [[1, 2], [3], [3], []]
        comps = graph.tarjan(adj)
        assert all(len(c) == 1 for c in comps)
        pos = {c[0]: i for i, c in enumerate(comps)}
        for s, ts in enumerate(adj):
            for t in ts:
                assert pos[t] < pos[s]

    @pytest.mark.parametrize("seed", range(20))
    def test_against_transitive_closure(self, seed):
        rng = np.random.default_rng(seed)
        n = 200
        adj = [sorted(set(rng.choice(n, size=int(rng.integers(0, 3)), replace=False).tolist())) for _ in range(n)]
        comps = graph.tarjan(adj)
        assert {frozenset(c) for c in comps} == closure_sccs(adj)
        # sinks first: no edge from an earlier component into a later one
        pos = {s: i for i, c in enumerate(comps) for s in c}
        for s, ts in enumerate(adj):
            for t in ts:
                assert pos[t] <= pos[s]

    def test_scc_decompose_uses_all_transitions(self, two_mec):
        comps = {frozenset(c) for c in graph.scc_decompose(two_mec)}
        assert frozenset({1, 2, 3, 4}) in comps


class TestZeno:
    def test_mutual_tau(self):
        ma = MarkovAutomaton(2, 0, (((TAU, Distribution.dirac(1)),), ((TAU, Distribution.dirac(0)),)), ((), ()))
        assert graph.zeno_check(ma) == {0, 1}

    def test_unreachable_cycle_ignored(self):
        ma = MarkovAutomaton(3, 0, ((), ((TAU, Distribution.dirac(2)),), ((TAU, Distribution.dirac(1)),)),
                             (((0, 1.0),), (), ()))
        assert graph.zeno_check(ma) == set()
        assert graph.zeno_check(ma, reachable_only=False) == {1, 2}

    def test_ctmc_and_polling(self):
        assert graph.zeno_check(chain(4)) == set()
        assert graph.zeno_check(gen_polling(PollingParams(1, 2))) == set()


class TestMec:
    def test_two_mec_model(self, two_mec):
        mecs = graph.mec_decompose(two_mec)
        assert [set(m.states) for m in mecs] == [{1, 2, 3, 4}, {5}]
        # the MEC-leaving alpha of s3 is dropped, beta retained
        assert mecs[0].actions[3] == frozenset({1})
        assert mecs[1].actions[5] == frozenset({graph.MARKOV})

    def test_absorbing_self_loop(self):
        mecs = graph.mec_decompose(chain(3))
        assert [set(m.states) for m in mecs] == [{2}]

    def test_restrict(self, two_mec):
        mecs = graph.mec_decompose(two_mec, restrict=[1, 2, 3])
        assert mecs == []

    @pytest.mark.parametrize("seed", range(120))
    def test_against_subset_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 11))
        ma = mixed_ma(rng, n)
        ch = [[succ for _, succ in row] for row in graph.choices(ma)]
        want = brute_force_mecs(ch)
        got = graph.mec_decompose(ma)
        assert {m.states for m in got} == want
        for m in got:
            for s in m.states:
                kept = {succ for c, succ in graph.choices(ma)[s] if c in m.actions[s]}
                assert kept == {c for c in ch[s] if c <= m.states}


class TestQualitative:
    def test_unreachable_goal(self):
        ma = chain(3)
        assert graph.almost_sure_reach_exists(ma, set()) == set()

    def test_chain(self):
        ma = chain(4)
        assert graph.almost_sure_reach_exists(ma, {3}) == {0, 1, 2, 3}
        assert graph.almost_sure_reach_forall(ma, {3}) == {0, 1, 2, 3}

    def test_avoiding_action_excluded(self):
        # state 0 may go to the goal 1 or loop in the absorbing state 2
        ma = MarkovAutomaton(3, 0, (((TAU, Distribution.dirac(1)), (TAU, Distribution.dirac(2))), (), ()),
                             ((), ((1, 1.0),), ((2, 1.0),)))
        assert 0 in graph.almost_sure_reach_exists(ma, {1})
        assert 0 not in graph.almost_sure_reach_forall(ma, {1})

    @pytest.mark.parametrize("seed", range(40))
    def test_against_value_iteration(self, seed):
        rng = np.random.default_rng(seed)
        n = 30
        mdp = random_mdp(rng, n, max_actions=2, max_succ=2)
        goal = set(rng.choice(n, size=3, replace=False).tolist())
        ma = mdp_to_ma(mdp)
        vmax = reach_prob_vi(mdp, goal, "max")
        vmin = reach_prob_vi(mdp, goal, "min")
        exists = graph.almost_sure_reach_exists(ma, goal)
        forall = graph.almost_sure_reach_forall(ma, goal)
        assert exists == {s for s in range(n) if vmax[s] > 1 - 1e-9}
        assert forall == {s for s in range(n) if vmin[s] > 1 - 1e-9}
        assert forall <= exists
        assert graph.avoid_forever_exists(ma, goal) == {s for s in range(n) if vmin[s] < 1e-12}
