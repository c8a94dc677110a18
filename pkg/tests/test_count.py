from __future__ import annotations

import numpy as np
import pytest

from cmlm_decode import MASK, new_hypothesis
from cmlm_decode.scorers import CountScorer, PlantedMarkovScorer, TrainingConfig, train_count_cmlm
from cmlm_decode.scorers.count import BOUNDARY


@pytest.fixture
def source_model():
    return PlantedMarkovScorer(source_vocab_size=5, target_vocab_size=3, seed=3)


def test_zero_examples_rejected(source_model):
    with pytest.raises(ValueError):
        train_count_cmlm(TrainingConfig(num_examples=0), source_model)
    with pytest.raises(ValueError):
        CountScorer().fit([])


def test_single_position_example_masks_it(source_model):
    model = CountScorer(target_vocab_size=3).fit([((1, 2), (2,))])
    assert model.max_target_len_ == 1
    assert list(model.counts_) == [(BOUNDARY, BOUNDARY, 0, model._source_bucket((1, 2)))]
    row = next(iter(model.counts_.values()))
    assert row.tolist() == [0, 0, 1]


def test_unseen_context_is_smoothed_uniform(source_model):
    model = train_count_cmlm(TrainingConfig(num_examples=20, seed=5), source_model)
    dist = model.distributions((4, 4, 4, 4), new_hypothesis(4))[1]
    assert dist.sum() == pytest.approx(1.0, abs=1e-12)
    assert (dist > 0).all()


def test_training_is_deterministic(source_model):
    cfg = TrainingConfig(num_examples=300, seed=9)
    a = train_count_cmlm(cfg, source_model)
    b = train_count_cmlm(cfg, source_model)
    assert a.to_json() == b.to_json()
    c = train_count_cmlm(TrainingConfig(num_examples=300, seed=10), source_model)
    assert c.to_json() != a.to_json()


def test_json_round_trip(source_model):
    model = train_count_cmlm(TrainingConfig(num_examples=200, seed=2), source_model)
    clone = CountScorer.from_json(model.to_json())
    state = new_hypothesis(4)
    src = (1, 2, 3)
    for pos, dist in model.distributions(src, state).items():
        np.testing.assert_array_equal(dist, clone.distributions(src, state)[pos])
    assert model.predict_lengths(src, 3) == clone.predict_lengths(src, 3)
    assert clone.to_json() == model.to_json()


def test_learned_conditionals_approach_planted_truth(source_model):
    # Single fixed source: interior contexts with both neighbors observed are
    # Markov blankets, so the planted conditional is A[l, y] * A[y, r] normalized.
    src = (0, 3, 1, 2, 4, 0)
    cfg = TrainingConfig(num_examples=10_000, seed=13, sources=(src,))
    model = train_count_cmlm(cfg, source_model)
    pi, trans = source_model.params_for(src)
    bucket = model._source_bucket(src)
    checked = 0
    for ctx, row in model.counts_.items():
        left, right, _, _ = ctx
        if left in (MASK, BOUNDARY) or right in (MASK, BOUNDARY):
            continue
        if row.sum() < 300:
            continue
        truth = trans[left] * trans[:, right]
        truth = truth / truth.sum()
        learned = (row + model.alpha) / (row.sum() + model.alpha * model.vocab_size_)
        tv = 0.5 * np.abs(learned - truth).sum()
        assert tv <= 0.1, f"context {ctx}: TV {tv:.3f}"
        checked += 1
    assert checked >= 3
    assert bucket == model._source_bucket(src)


def test_length_model_learns_the_triangular_peak(source_model):
    src = (2, 2, 2, 2)
    model = train_count_cmlm(
        TrainingConfig(num_examples=4000, seed=21, sources=(src,)), source_model
    )
    lengths = model.predict_lengths(src, 3)
    assert lengths[0][0] == len(src)
    probs = [p for _, p in lengths]
    assert probs == sorted(probs, reverse=True)


def test_predict_lengths_validates_input(source_model):
    model = train_count_cmlm(TrainingConfig(num_examples=10, seed=1), source_model)
    with pytest.raises(ValueError):
        model.predict_lengths((), 1)
    with pytest.raises(ValueError):
        model.predict_lengths((1, 2), 0)


def test_mask_size_spans_full_range(source_model):
    # Uniform S in {1..N}: over many examples of length 4 every size appears.
    rng = np.random.default_rng([99, 11])
    sizes = {int(rng.integers(1, 5)) for _ in range(200)}
    assert sizes == {1, 2, 3, 4}
