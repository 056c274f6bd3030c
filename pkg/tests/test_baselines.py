import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import complete_graph, path_graph, star_graph
from oracles import dense_spectral_radius, greedy_eigen_drop, random_graph
from netscreen.baselines import (
    BASELINES,
    EigenvaluePolicy,
    MaxDegreePolicy,
    RandomPolicy,
    eigen_drop_policy,
    make_baseline,
    max_degree_policy,
    none_policy,
    random_policy,
)
from netscreen.epidemic import EpidemicParams, RoundInfo, run_episode
from netscreen.graph import ContactNetwork, generate_erdos_renyi, spectral_radius


class TestRandom:
    def test_whole_pool(self):
        assert random_policy({1, 4, 7}, 3, 0) == {1, 4, 7}

    def test_empty_budget(self):
        assert random_policy({1, 2}, 0, 0) == frozenset()

    def test_insufficient(self):
        with pytest.raises(ValueError):
            random_policy({1}, 2, 0)

    def test_uniform(self):
        rng = np.random.default_rng(1)
        draws = 10_000
        counts = np.zeros(5)
        for _ in range(draws):
            (v,) = random_policy(range(5), 1, rng)
            counts[v] += 1
        se = np.sqrt(0.2 * 0.8 / draws)
        assert np.all(np.abs(counts / draws - 0.2) <= 3 * se)


class TestMaxDegree:
    def test_examples(self):
        assert max_degree_policy(star_graph(4), range(5), 1) == {0}
        assert max_degree_policy(path_graph(3), range(3), 1) == {1}
        assert max_degree_policy(complete_graph(3), range(3), 2) == {0, 1}

    def test_respects_feasible(self):
        assert max_degree_policy(star_graph(4), {2, 3}, 1) == {2}


class TestEigenDrop:
    def test_star_centre(self):
        assert eigen_drop_policy(star_graph(4), range(5), 1) == {0}

    def test_triangle_tie(self):
        assert eigen_drop_policy(complete_graph(3), range(3), 1) == {0}

    def test_insufficient(self):
        with pytest.raises(ValueError):
            eigen_drop_policy(path_graph(3), {0}, 2)

    def test_matches_greedy_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(15):
            n, edges = random_graph(rng, 8)
            net = ContactNetwork(n, edges)
            k = int(rng.integers(0, min(3, n) + 1))
            assert eigen_drop_policy(net, range(n), k) == greedy_eigen_drop(n, edges, range(n), k)

    @given(st.integers(2, 8), st.floats(0.1, 1), st.integers(0, 500))
    def test_never_increases_radius(self, n, p, seed):
        net = generate_erdos_renyi(n, p, seed)
        (v,) = eigen_drop_policy(net, range(n), 1)
        assert spectral_radius(net.without_nodes([v])) <= spectral_radius(net) + 1e-9
        assert dense_spectral_radius(n, net.without_nodes([v]).edges) <= \
            min(dense_spectral_radius(n, net.without_nodes([u]).edges) for u in range(n)) + 1e-6


def _info(net, obs=frozenset(), k=2):
    return RoundInfo(0, frozenset(obs), frozenset(), k, net)


class TestEstimators:
    @pytest.mark.parametrize("name", sorted(BASELINES))
    def test_returns_feasible_sets(self, name):
        net = generate_erdos_renyi(10, 0.4, 0)
        pol = make_baseline(name, net)
        pol.reset(3, np.random.default_rng(0))
        act = pol.act(_info(net, {0, 1, 2}, 3))
        expected = 0 if name == "none" else 3
        assert len(act) == expected and not (act & {0, 1, 2})

    def test_budget_clipped_to_feasible(self):
        net = complete_graph(4)
        pol = MaxDegreePolicy().fit(net)
        assert len(pol.act(_info(net, {0, 1, 2}, 3))) == 1

    @pytest.mark.parametrize("cls", [MaxDegreePolicy, EigenvaluePolicy])
    def test_deterministic(self, cls):
        net = generate_erdos_renyi(12, 0.3, 4)
        a, b = cls().fit(net), cls().fit(net)
        assert a.act(_info(net)) == b.act(_info(net))

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown policy"):
            make_baseline("oracle", path_graph(2))

    def test_none(self):
        assert none_policy() == frozenset()
        assert none_policy(1, 2, k=3) == frozenset()

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            MaxDegreePolicy().act(_info(path_graph(3)))

    def test_random_in_episode(self):
        net = generate_erdos_renyi(15, 0.3, 0)
        trace = run_episode(net, EpidemicParams(0.2, 0.2), RandomPolicy().fit(net), 10, 3, 2)
        for s in trace.steps:
            assert len(s.action) == 2 and not (s.action & s.observation)

    def test_eigen_cache_consistent(self):
        net = generate_erdos_renyi(9, 0.4, 2)
        pol = EigenvaluePolicy().fit(net)
        first = pol.act(_info(net, {1}))
        assert pol.act(_info(net, {1})) == first == eigen_drop_policy(net, set(range(9)) - {1}, 2)


class TestBatchInterface:
    def test_maxdegree_predict(self):
        pol = MaxDegreePolicy().fit(star_graph(4))
        assert pol.predict(np.full((2, 5), 0.5), k=1, observed=[(), {0}]) == [{0}, {1}]

    def test_transform_indicator(self):
        pol = EigenvaluePolicy().fit(complete_graph(4))
        out = pol.transform(np.full(4, 0.5), k=2)
        assert out.shape == (1, 4) and out.sum() == 2 and set(np.unique(out)) <= {0.0, 1.0}

    def test_random_seeded_and_varies(self):
        net = generate_erdos_renyi(20, 0.2, 0)
        X = np.full((6, 20), 0.5)
        a = RandomPolicy(random_state=3).fit(net).predict(X, k=2)
        assert a == RandomPolicy(random_state=3).fit(net).predict(X, k=2)
        assert len(set(a)) > 1

    def test_needs_budget(self):
        with pytest.raises(ValueError, match="budget"):
            MaxDegreePolicy().fit(path_graph(3)).predict(np.zeros(3))

    @pytest.mark.parametrize("X", [np.zeros(4), np.full(3, 1.5), np.full(3, np.nan)])
    def test_bad_input(self, X):
        with pytest.raises(ValueError):
            MaxDegreePolicy().fit(path_graph(3)).predict(X, k=1)

    def test_clone_keeps_params(self):
        from sklearn.base import clone
        assert clone(RandomPolicy(random_state=9)).get_params() == {"random_state": 9}
        assert EigenvaluePolicy(tol=1e-6).get_params() == {"tol": 1e-6}


@given(st.integers(2, 15), st.floats(0.05, 1), st.integers(0, 10**6),
       st.sampled_from(sorted(BASELINES)), st.integers(1, 4))
def test_actions_respect_budget_and_observation(n, p, seed, name, k):
    net = generate_erdos_renyi(n, p, seed)
    k = min(k, n)
    trace = run_episode(net, EpidemicParams(0.4, 0.3), make_baseline(name, net), 6, seed, k)
    for s in trace.steps:
        assert len(s.action) <= k and not (s.action & s.observation)
        if name != "none":
            assert len(s.action) == min(k, n - len(s.observation))
