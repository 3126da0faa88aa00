import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cpcsim import agent as ag
from cpcsim.probkernels import GaussCatHyper
from cpcsim.protocol import SignAssignment, run_round
from cpcsim.world import WorldConfig, generate_world, true_category_means
from conftest import make_agent


def _obs(rows):
    return np.asarray(rows, dtype=float).reshape(len(rows), -1)


class TestInit:
    def test_single_category(self, rng):
        a = ag.init_agent(0, 1, GaussCatHyper(num_signs=3), rng.normal(size=(20, 2)), rng)
        assert np.all(a.assignments == 0)

    def test_deterministic(self):
        obs = np.random.default_rng(1).normal(size=(30, 2))
        a = ag.init_agent(0, 4, GaussCatHyper(), obs, np.random.default_rng(9))
        b = ag.init_agent(0, 4, GaussCatHyper(), obs, np.random.default_rng(9))
        assert a.to_dict() == b.to_dict()

    def test_phi_prior_uniform(self, rng):
        a = ag.init_agent(0, 3, GaussCatHyper(num_signs=5), rng.normal(size=(10, 1)), rng)
        assert np.allclose(ag.association(a), 1 / 3)

    def test_bad_z(self, rng):
        with pytest.raises(ValueError):
            ag.init_agent(0, 0, GaussCatHyper(), rng.normal(size=(5, 1)), rng)

    def test_round_trip(self, rng):
        a = ag.init_agent(3, 4, GaussCatHyper(), rng.normal(size=(10, 2)), rng)
        b = ag.AgentState.from_dict(a.to_dict())
        assert b.to_dict() == a.to_dict()


class TestPerceive:
    def test_single_category_unchanged(self, rng):
        a = make_agent([[0.0]], [[1.0]], [[0], [0]], assignments=[0, 0, 0])
        ag.perceive(a, _obs([1, 2, 3]), [0, 1, 0], rng)
        assert list(a.assignments) == [0, 0, 0]

    def test_matches_nearest_mean(self, rng):
        cfg = WorldConfig(num_objects=300, num_true_categories=4, num_agents=2,
                          feature_dim=2, category_separation=8.0, noise_scale=1.0, seed=4)
        world = generate_world(cfg)
        means = true_category_means(cfg)[0]
        obs = world.observations[0]
        a = make_agent(means, np.ones_like(means), np.zeros((4, 4)),
                       assignments=np.zeros(len(obs), dtype=int))
        ag.perceive(a, obs, np.zeros(len(obs), dtype=int), rng)
        nearest = np.argmin(((obs[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
        assert np.mean(a.assignments == nearest) >= 0.99

    def test_prior_dominant(self, rng):
        # equal likelihoods, row for sign 1 concentrated on category 2
        a = make_agent([[0.0], [0.0], [0.0]], [[1.0]] * 3,
                       [[0, 0, 0], [0, 0, 10**6]], alpha=1e-12, assignments=[0] * 50)
        ag.perceive(a, np.zeros((50, 1)), np.ones(50, dtype=int), rng)
        assert np.all(a.assignments == 2)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_weights_normalize(self, seed):
        r = np.random.default_rng(seed)
        a = make_agent(r.normal(size=(3, 2)), r.gamma(2, size=(3, 2)),
                       r.integers(0, 20, size=(4, 3)), assignments=[0] * 6)
        q = ag.perception_posterior(a, r.normal(size=(6, 2)), r.integers(4, size=6))
        assert np.all(np.abs(q.sum(axis=1) - 1) <= 1e-12)


class TestPropose:
    def test_single_sign(self, rng):
        a = make_agent([[0.0], [1.0]], [[1.0]] * 2, [[3, 1]])
        assert {ag.propose_sign(a, 0, "sampled", _obs([0.3]), rng) for _ in range(50)} == {0}

    def test_sampled_uniform(self, rng):
        a = make_agent([[0.0], [1.0]], [[1.0]] * 2, [[2, 2]] * 4)
        n = 100_000
        lw = ag.proposal_log_weights(a, _obs([0.0]), "sampled")[0]
        from cpcsim.probkernels import sample_log_weights
        draws = sample_log_weights(np.tile(lw, (n, 1)), rng.random(n))
        counts = np.bincount(draws, minlength=4)
        assert np.all(np.abs(counts - n / 4) <= 3 * math.sqrt(n * 0.25 * 0.75))
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_collapsed_hand_weights(self, rng):
        means, prec = [[-1.0], [1.5]], [[1.0], [0.5]]
        counts = [[4, 1], [0, 3]]
        a = make_agent(means, prec, counts)
        x = 0.2
        lik = [stats.norm.pdf(x, -1.0, 1.0), stats.norm.pdf(x, 1.5, 1 / math.sqrt(0.5))]
        phi = [[5 / 7, 2 / 7], [1 / 5, 4 / 5]]
        weights = np.array([sum(l * p for l, p in zip(lik, row)) for row in phi])
        expected = weights / weights.sum()
        n = 40_000
        hits = sum(ag.propose_sign(a, 0, "collapsed", _obs([x]), rng) == 0 for _ in range(n))
        half = 3 * math.sqrt(expected[0] * (1 - expected[0]) / n)
        assert abs(hits / n - expected[0]) <= half

    def test_one_draw(self):
        a = make_agent([[0.0], [1.0]], [[1.0]] * 2, [[2, 1], [1, 2]])
        r1, r2 = np.random.default_rng(2), np.random.default_rng(2)
        ag.propose_sign(a, 0, "sampled", _obs([0.0]), r1)
        r2.random()
        assert r1.random() == r2.random()


class TestAcceptance:
    # Z=3, alpha=1: row [5,2,0] gives 0.6 on category 0, row [2,5,0] gives 0.3
    listener = staticmethod(lambda: make_agent([[0.0]] * 3, [[1.0]] * 3,
                                               [[5, 2, 0], [2, 5, 0]], assignments=[0]))

    def test_identity(self):
        a = self.listener()
        for w in range(2):
            for mode in ag.MODES:
                assert ag.acceptance_probability(a, 0, w, w, mode, _obs([0.0])) == 1.0

    def test_hand_ratio(self):
        a = self.listener()
        assert np.allclose(ag.association(a)[:, 0], [0.6, 0.3])
        assert ag.acceptance_probability(a, 0, 0, 1, "sampled", _obs([0.0])) == 1.0
        assert ag.acceptance_probability(a, 0, 1, 0, "sampled", _obs([0.0])) == pytest.approx(0.5)

    def test_zero_denominator(self):
        assert ag._acceptance_from_scores(-1.0, -np.inf) == 1.0
        assert ag._acceptance_from_scores(-np.inf, -np.inf) == 1.0

    def test_range_check(self):
        with pytest.raises(ValueError):
            ag.acceptance_probability(self.listener(), 0, 2, 0, "sampled", _obs([0.0]))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-30, 30))
    def test_likelihood_scale_invariance(self, log_c):
        # scaling every likelihood by c: shift all log-likelihoods by log c
        a = make_agent([[0.0], [2.0]], [[1.0]] * 2, [[3, 1], [0, 2]])
        obs = _obs([0.7])
        base = ag.acceptance_probability(a, 0, 1, 0, "collapsed", obs)
        ll = ag.emission_loglik(a, obs) + log_c
        lphi = np.log(ag.association(a))
        from cpcsim.probkernels import log_sum_exp
        s = log_sum_exp(ll[:, None, :] + lphi[None], axis=2)[0]
        assert float(ag._acceptance_from_scores(s[1], s[0])) == pytest.approx(base, rel=1e-9)


class TestDecide:
    def test_extremes(self, rng):
        a = make_agent([[0.0]], [[1.0]], [[0]])
        assert all(ag.decide(a, 1.0, rng) for _ in range(500))
        assert not any(ag.decide(a, 0.0, rng) for _ in range(500))

    def test_half(self, rng):
        a = make_agent([[0.0]], [[1.0]], [[0]])
        rate = np.mean([ag.decide(a, 0.5, rng) for _ in range(100_000)])
        assert 0.49 <= rate <= 0.51

    def test_bad_r(self, rng):
        with pytest.raises(ValueError):
            ag.decide(make_agent([[0.0]], [[1.0]], [[0]]), 1.5, rng)


class TestUpdate:
    def test_empty_category_is_prior_point(self):
        a = make_agent([[5.0], [7.0]], [[3.0]] * 2, [[0, 0]], assignments=[0, 0, 0])
        a.hyper = GaussCatHyper(ng_mean0=(0.0,), ng_a0=2.0, ng_b0=4.0, num_signs=1, num_categories=2)
        ag.update_parameters(a, _obs([1, 2, 3]), [0, 0, 0])
        assert a.means[1, 0] == 0.0
        assert a.precisions[1, 0] == pytest.approx(0.5)

    @pytest.mark.parametrize("n", [1, 10, 1000])
    def test_phi_concentrates(self, n):
        a = make_agent([[0.0]] * 3, [[1.0]] * 3, np.zeros((2, 3)), assignments=[1] * n)
        ag.update_parameters(a, np.zeros((n, 1)), np.zeros(n, dtype=int))
        assert ag.association(a)[0, 1] == pytest.approx((n + 1) / (n + 3))

    def test_frozen_language(self, rng):
        a = make_agent([[0.0]] * 2, [[1.0]] * 2, [[4, 1], [0, 3]], assignments=[0, 1, 1])
        a.frozen_language = True
        before = a.phi_counts.copy()
        for _ in range(5):
            ag.perceive(a, rng.normal(size=(3, 1)), [1, 0, 1], rng)
            ag.update_parameters(a, rng.normal(size=(3, 1)), rng.integers(2, size=3))
        assert np.array_equal(a.phi_counts, before)


class TestMapSign:
    def test_single(self):
        a = make_agent([[0.0]], [[1.0]], [[0]])
        assert ag.map_sign_estimate(a, 0, "sampled", _obs([0.0])) == 0

    def test_unique_max(self):
        a = make_agent([[0.0]] * 2, [[1.0]] * 2, [[0, 1], [0, 2], [9, 0]], assignments=[0])
        assert ag.map_sign_estimate(a, 0, "sampled", _obs([0.0])) == 2

    def test_tie_lowest(self):
        a = make_agent([[0.0]] * 2, [[1.0]] * 2, [[5, 0], [0, 0], [0, 0], [5, 0]], assignments=[0])
        assert ag.map_sign_estimate(a, 0, "sampled", _obs([0.0])) == 0

    def test_no_randomness(self):
        a = make_agent([[0.0], [1.0]], [[1.0]] * 2, [[2, 1], [1, 2]], assignments=[0, 1])
        obs = _obs([0.1, 0.9])
        first = ag.map_sign_estimates(a, "collapsed", obs)
        np.random.default_rng(99).random(10)
        assert np.array_equal(first, ag.map_sign_estimates(a, "collapsed", obs))


class TestInformationBarrier:
    def test_listener_outputs_ignore_speaker(self):
        listener = make_agent([[0.0], [1.0]], [[1.0]] * 2, [[3, 1], [1, 3]], assignments=[0, 1], k=1)
        obs_l = _obs([0.2, 0.8])
        ref = ag.acceptance_table(listener, obs_l, "collapsed")

        # two speakers with different private states but the same proposal rows
        s1 = make_agent([[-4.0], [9.0]], [[0.1]] * 2, [[7, 0], [0, 7]], assignments=[0, 1])
        s2 = make_agent([[50.0], [-2.0]], [[9.0]] * 2, [[7, 0], [0, 7]], assignments=[0, 1])
        outcomes = []
        for speaker in (s1, s2):
            listener_copy = listener.copy()
            signs = SignAssignment([1, 0], 2)
            obs = np.stack([_obs([0.2, 0.8]), obs_l])
            _, events = run_round([speaker, listener_copy], signs, obs, "mh", "sampled", 0,
                                  np.random.default_rng(0))
            outcomes.append([(e.proposed, e.accepted) for e in events])
            assert np.array_equal(ag.acceptance_table(listener_copy, obs_l, "collapsed"), ref)
        assert outcomes[0] == outcomes[1]
        assert ag.decide.__code__.co_varnames[:3] == ("listener", "r", "rng")
