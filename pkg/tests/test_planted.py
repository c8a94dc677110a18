from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

import oracles
from cmlm_decode import MASK, HypothesisState, new_hypothesis
from cmlm_decode.scorers import PlantedMarkovScorer, constrained_marginals
from cmlm_decode.types import apply_unmask, PositionPrediction


def state_from_tokens(tokens):
    return HypothesisState(
        n=len(tokens),
        tokens=tuple(tokens),
        log_scores=tuple(math.nan if t == MASK else 0.0 for t in tokens),
        step=0,
    )


def random_state(rng, n, v):
    tokens = [int(rng.integers(0, v)) if rng.random() < 0.5 else MASK for _ in range(n)]
    if MASK not in tokens:
        tokens[int(rng.integers(0, n))] = MASK
    return tokens


class TestConstrainedMarginals:
    def test_two_state_symmetric_chain(self):
        # p(y0=a | y1=a) under pi=(.5,.5), sticky transitions: 0.45 / (0.45+0.05)
        pi = np.array([0.5, 0.5])
        trans = np.array([[0.9, 0.1], [0.1, 0.9]])
        expected = oracles.enumerate_posteriors(pi, trans, [MASK, 0])
        assert expected[0][0] == pytest.approx(0.9, abs=1e-12)
        got = constrained_marginals(pi, trans, [MASK, 0])
        assert got[0][0] == pytest.approx(0.9, abs=1e-10)

    def test_unconstrained_single_position_is_initial_distribution(self):
        pi = np.array([0.2, 0.3, 0.5])
        trans = np.full((3, 3), 1 / 3)
        got = constrained_marginals(pi, trans, [MASK])
        np.testing.assert_allclose(got[0], pi, atol=1e-12)

    def test_fully_observed_returns_nothing(self):
        pi = np.array([0.5, 0.5])
        trans = np.array([[0.6, 0.4], [0.4, 0.6]])
        assert constrained_marginals(pi, trans, [0, 1]) == {}

    def test_matches_enumeration_on_random_states(self, rng):
        for _ in range(200):
            v = int(rng.integers(2, 5))
            n = int(rng.integers(1, 5))
            pi_raw = rng.random(v) + 0.05
            pi = pi_raw / pi_raw.sum()
            trans_raw = rng.random((v, v)) + 0.05
            trans = trans_raw / trans_raw.sum(axis=1, keepdims=True)
            tokens = random_state(rng, n, v)
            want = oracles.enumerate_posteriors(pi, trans, tokens)
            got = constrained_marginals(pi, trans, tokens)
            assert set(got) == set(want)
            for pos in want:
                np.testing.assert_allclose(got[pos], want[pos], atol=1e-10)


class TestPlantedScorer:
    def test_parameters_are_proper_and_deterministic(self, planted):
        pi, trans = planted.params_for((1, 2, 3))
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(trans.sum(axis=1), 1.0, atol=1e-12)
        assert (pi > 0).all() and (trans > 0).all()
        twin = PlantedMarkovScorer(source_vocab_size=6, target_vocab_size=3, seed=11)
        pi2, trans2 = twin.params_for((1, 2, 3))
        assert (pi == pi2).all() and (trans == trans2).all()
        other = PlantedMarkovScorer(source_vocab_size=6, target_vocab_size=3, seed=12)
        assert not (other.params_for((1, 2, 3))[0] == pi).all()

    def test_distributions_sum_to_one(self, planted):
        state = state_from_tokens([MASK, 1, MASK, MASK])
        for dist in planted.distributions((0, 5), state).values():
            assert dist.sum() == pytest.approx(1.0, abs=1e-9)

    def test_posterior_matches_enumeration(self, planted, rng):
        src = (2, 4, 1)
        pi, trans = planted.params_for(src)
        for _ in range(50):
            tokens = random_state(rng, int(rng.integers(1, 5)), 3)
            got = planted.distributions(src, state_from_tokens(tokens))
            want = oracles.enumerate_posteriors(pi, trans, tokens)
            for pos in want:
                np.testing.assert_allclose(got[pos], want[pos], atol=1e-10)

    def test_chain_rule_over_all_unmask_orders(self, planted, rng):
        src = (3, 0)
        pi, trans = planted.params_for(src)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            y = [int(rng.integers(0, 3)) for _ in range(n)]
            joint = oracles.chain_prob(pi, trans, y)
            for order in itertools.permutations(range(n)):
                state = new_hypothesis(n)
                prob = 1.0
                for pos in order:
                    dist = planted.distributions(src, state)[pos]
                    prob *= float(dist[y[pos]])
                    state = apply_unmask(
                        state, [PositionPrediction(pos, y[pos], float(dist[y[pos]]))]
                    )
                assert prob == pytest.approx(joint, abs=1e-9)

    def test_all_positions_serves_leave_one_out(self, planted):
        src = (1, 1, 4)
        pi, trans = planted.params_for(src)
        tokens = [2, MASK, 0]
        dists = planted.distributions(src, state_from_tokens(tokens), all_positions=True)
        assert set(dists) == {0, 1, 2}
        freed = list(tokens)
        freed[0] = MASK
        want = oracles.enumerate_posteriors(pi, trans, freed)[0]
        np.testing.assert_allclose(dists[0], want, atol=1e-10)

    def test_observed_token_out_of_vocab(self, planted):
        with pytest.raises(ValueError):
            planted.distributions((1,), state_from_tokens([7, MASK]))

    def test_empty_source_rejected(self, planted):
        with pytest.raises(ValueError):
            planted.predict_lengths((), 1)


class TestLengthModel:
    def test_triangular_support_and_peak(self, planted):
        probs = planted.length_probs((1, 2, 3, 4, 0))
        assert set(probs) == {3, 4, 5, 6, 7}
        assert probs[5] == pytest.approx(3 / 9)
        assert probs[4] == probs[6] == pytest.approx(2 / 9)

    def test_short_source_truncates_at_one(self, planted):
        probs = planted.length_probs((2,))
        assert set(probs) == {1, 2, 3}
        assert probs[1] == pytest.approx(3 / 6)

    def test_top1_is_source_length(self, planted):
        assert planted.predict_lengths((1, 2, 3, 4, 0), 1) == [(5, pytest.approx(3 / 9))]

    def test_beam_larger_than_support(self, planted):
        got = planted.predict_lengths((1, 2, 3, 4, 0), 10)
        assert len(got) == 5
        probs = [p for _, p in got]
        assert probs == sorted(probs, reverse=True)

    def test_ties_break_toward_smaller_length(self, planted):
        got = planted.predict_lengths((1, 2, 3, 4, 0), 3)
        assert [n for n, _ in got] == [5, 4, 6]


class TestSampling:
    def test_sampled_pairs_have_positive_likelihood(self, planted, rng):
        for _ in range(25):
            src = planted.sample_source(rng, (2, 6))
            tgt = planted.sample_target(src, rng)
            assert math.isfinite(planted.sequence_log_prob(src, tgt))
            assert len(tgt) in planted.length_probs(src)

    def test_sampling_is_reproducible(self, planted):
        a = planted.sample_target((1, 2), np.random.default_rng(7))
        b = planted.sample_target((1, 2), np.random.default_rng(7))
        assert a == b
