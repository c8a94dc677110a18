from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from cmlm_decode import (
    MASK,
    DecodeConfig,
    Example,
    PositionPrediction,
    ProgressViolation,
    SubsetViolation,
    Vocab,
    apply_unmask,
    build_trace,
    new_hypothesis,
)


def pred(pos, tok=0, prob=0.9):
    return PositionPrediction(position=pos, token=tok, prob=prob)


class TestNewHypothesis:
    def test_all_masked_at_start(self):
        state = new_hypothesis(3)
        assert state.masked_positions == (0, 1, 2)
        assert state.tokens == (MASK, MASK, MASK)
        assert state.step == 0

    def test_single_position(self):
        state = new_hypothesis(1)
        assert state.masked_positions == (0,)
        assert not state.is_complete

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            new_hypothesis(0)


class TestApplyUnmask:
    def test_single_commit(self):
        state = apply_unmask(new_hypothesis(3), [pred(0, tok=1, prob=0.9)])
        assert state.masked_positions == (1, 2)
        assert state.tokens[0] == 1
        assert state.scores[0] == pytest.approx(0.9)
        assert state.step == 1

    def test_completing_commit(self):
        state = apply_unmask(new_hypothesis(3), [pred(0)])
        state = apply_unmask(state, [pred(1, tok=1, prob=0.8), pred(2, tok=2, prob=0.7)])
        assert state.is_complete
        assert state.step == 2

    def test_unmasked_position_rejected(self):
        state = apply_unmask(new_hypothesis(2), [pred(0, prob=0.5)])
        with pytest.raises(SubsetViolation):
            apply_unmask(state, [pred(0, prob=0.5)])

    def test_empty_choice_rejected(self):
        with pytest.raises(ProgressViolation):
            apply_unmask(new_hypothesis(2), [])

    def test_mask_plus_committed_partition_positions(self):
        state = apply_unmask(new_hypothesis(5), [pred(1), pred(3)])
        committed = [i for i, t in enumerate(state.tokens) if t != MASK]
        assert len(state.masked_positions) + len(committed) == 5
        assert set(state.masked_positions) | set(committed) == set(range(5))


@st.composite
def random_partition_trace(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    positions = list(range(n))
    order = draw(st.permutations(positions))
    blocks = []
    i = 0
    while i < len(order):
        size = draw(st.integers(min_value=1, max_value=len(order) - i))
        block = sorted(order[i : i + size])
        probs = [draw(st.floats(min_value=0.05, max_value=1.0)) for _ in block]
        blocks.append([(p, p % 3, prob) for p, prob in zip(block, probs)])
        i += size
    return n, blocks


@given(random_partition_trace())
def test_trace_replay_and_partition_invariants(case):
    n, blocks = case
    trace = build_trace(n, blocks)
    replayed = trace.replay()
    assert replayed.tokens == trace.final.tokens
    assert replayed.log_scores == trace.final.log_scores
    committed_sets = [frozenset(p.position for p in s.unmasked) for s in trace.steps]
    assert frozenset().union(*committed_sets) == frozenset(range(n))
    for a in range(len(committed_sets)):
        for b in range(a + 1, len(committed_sets)):
            assert not committed_sets[a] & committed_sets[b]
    masks = trace.mask_sets()
    for before, after in zip(masks, masks[1:]):
        assert after < before


def test_trace_validate_catches_nonempty_final():
    trace = build_trace(2, [[(0, 1, 0.5)], [(1, 0, 0.5)]])
    broken = trace.steps[:1]
    import dataclasses

    bad = dataclasses.replace(trace, steps=broken)
    with pytest.raises(ValueError):
        bad.validate()


class TestVocab:
    def test_mask_is_never_a_symbol_id(self):
        vocab = Vocab.from_size(4)
        assert vocab.size == 4
        assert vocab.mask_id == MASK
        assert vocab.symbol(MASK) == "<mask>"
        assert vocab.symbol(2) == "t2"

    def test_too_small(self):
        with pytest.raises(ValueError):
            Vocab(("only",))

    def test_duplicate_symbols(self):
        with pytest.raises(ValueError):
            Vocab(("a", "a"))


class TestExample:
    def test_ref_optional(self):
        ex = Example(src=(1, 2))
        assert ex.ref is None

    def test_empty_source_rejected(self):
        with pytest.raises(ValueError):
            Example(src=())

    def test_mask_id_rejected(self):
        with pytest.raises(ValueError):
            Example(src=(1, MASK))


class TestPositionPrediction:
    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            PositionPrediction(position=0, token=1, prob=0.0)
        with pytest.raises(ValueError):
            PositionPrediction(position=0, token=1, prob=1.5)

    def test_mask_token_rejected(self):
        with pytest.raises(ValueError):
            PositionPrediction(position=0, token=MASK, prob=0.5)

    def test_log_prob(self):
        assert pred(0, prob=0.5).log_prob == pytest.approx(math.log(0.5))


class TestDecodeConfig:
    def test_count_heuristics_need_integers(self):
        DecodeConfig(heuristic="fixed-T", param=3)
        with pytest.raises(ValueError):
            DecodeConfig(heuristic="fixed-T", param=0.5)
        with pytest.raises(ValueError):
            DecodeConfig(heuristic="fixed-K", param=0)

    def test_thresholds_need_unit_interval(self):
        DecodeConfig(heuristic="thresh", param=0.0)
        DecodeConfig(heuristic="comb-thresh", param=1.0)
        with pytest.raises(ValueError):
            DecodeConfig(heuristic="thresh", param=1.5)

    def test_remask_strategies_require_fixed_t(self):
        DecodeConfig(update_strategy="update-all", heuristic="fixed-T", param=4)
        with pytest.raises(ValueError):
            DecodeConfig(update_strategy="update-all", heuristic="comb-thresh", param=0.5)
        with pytest.raises(ValueError):
            DecodeConfig(update_strategy="update-masked", heuristic="fixed-K", param=2)

    def test_beam_and_cap_validation(self):
        with pytest.raises(ValueError):
            DecodeConfig(length_beam=0)
        with pytest.raises(ValueError):
            DecodeConfig(max_iterations=0)

    def test_default_cap_never_truncates_fixed_t(self):
        config = DecodeConfig(heuristic="fixed-T", param=30)
        assert config.resolved_cap(4) == 30
        assert DecodeConfig(heuristic="fixed-K", param=1).resolved_cap(4) == 8
