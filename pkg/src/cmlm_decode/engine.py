"""The iterative decode loop, update strategies, and length-beam decoding.

Decoding starts from an all-MASK hypothesis and repeatedly queries the
scorer, picks positions with the configured heuristic, and commits their
argmax predictions. Under ``update-masked-sub`` the mask can only shrink;
the two re-masking strategies (``update-all``, ``update-masked``) run on
the fixed-T schedule and may move low-scoring positions back into the
mask. ``decode`` is a pure function of its arguments, so corpus sentences
and length-beam candidates can be decoded concurrently.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from sklearn.base import BaseEstimator

from .heuristics import select_positions, top_by_prob
from .scorers.base import Scorer
from .types import (
    MASK,
    DecodeConfig,
    DecodeStep,
    DecodeTrace,
    HypothesisState,
    PositionPrediction,
    apply_unmask,
    new_hypothesis,
)


@dataclass(frozen=True)
class DecodeResult:
    """Final sequence plus the trace that produced it."""

    sequence: tuple[int, ...]
    trace: DecodeTrace

    @property
    def norm_score(self) -> float:
        return self.trace.final.mean_log_score()

    @property
    def iterations(self) -> int:
        return self.trace.iterations


@dataclass(frozen=True)
class LengthCandidate:
    n: int
    length_prob: float
    result: DecodeResult

    @property
    def norm_score(self) -> float:
        return self.result.norm_score


@dataclass(frozen=True)
class LengthBeamResult:
    """One decode per candidate length; the winner maximizes the
    length-normalized score, ties broken by the smaller length."""

    candidates: tuple[LengthCandidate, ...]
    selected_index: int

    @property
    def selected(self) -> LengthCandidate:
        return self.candidates[self.selected_index]


def _filled_tokens(
    old: HypothesisState, new: HypothesisState, by_pos: dict[int, PositionPrediction]
) -> tuple[int, ...]:
    """Greedy completion: committed tokens, the iteration's argmax at masked
    slots, and the previous token where a slot was re-masked without a fresh
    prediction."""
    out = []
    for i, tok in enumerate(new.tokens):
        if tok != MASK:
            out.append(tok)
        elif i in by_pos:
            out.append(by_pos[i].token)
        else:
            out.append(old.tokens[i])
    return tuple(out)


def _schedule_count(n: int, t_param: int, iteration: int, masked: int, decay: bool) -> int:
    """How many positions the fixed-T schedule commits on ``iteration`` (1-based)."""
    if decay:
        keep = (n * (t_param - iteration)) // t_param if iteration < t_param else 0
        return max(0, masked - keep)
    return min(math.ceil(n / t_param), masked)


def apply_update_strategy(
    state: HypothesisState,
    predictions: Sequence[PositionPrediction],
    strategy: str,
    count: int,
) -> HypothesisState:
    """One schedule-driven update committing ``count`` additional positions.

    ``update-masked-sub`` commits the ``count`` highest-probability masked
    predictions and freezes them. The re-masking strategies shrink the mask
    by ``count`` but re-select its membership as the lowest-scoring
    positions over the whole hypothesis: ``update-masked`` keeps committed
    tokens and their unmask-time scores, ``update-all`` refreshes tokens
    and scores everywhere first. ``count`` is clamped to the mask size.
    """
    masked = set(state.masked_positions)
    count = min(count, len(masked))
    by_pos = {p.position: p for p in predictions}
    missing = masked - set(by_pos)
    if missing:
        raise ValueError(f"predictions missing for masked positions {sorted(missing)}")
    if strategy == "update-masked-sub":
        chosen = top_by_prob([by_pos[i] for i in sorted(masked)], count)
        return apply_unmask(state, [by_pos[i] for i in sorted(chosen)])
    if strategy == "update-all":
        if set(by_pos) != set(range(state.n)):
            raise ValueError("update-all needs predictions at every position")
        scored = [(by_pos[i].prob, i) for i in range(state.n)]
    elif strategy == "update-masked":
        scored = [
            (by_pos[i].prob if i in masked else math.exp(state.log_scores[i]), i)
            for i in range(state.n)
        ]
    else:
        raise ValueError(f"unknown update strategy {strategy!r}")
    new_mask_size = len(masked) - count
    new_mask = {i for _, i in sorted(scored)[:new_mask_size]}
    tokens = []
    scores = []
    for i in range(state.n):
        if i in new_mask:
            tokens.append(MASK)
            scores.append(math.nan)
        elif strategy == "update-all" or i in masked:
            tokens.append(by_pos[i].token)
            scores.append(by_pos[i].log_prob)
        else:
            tokens.append(state.tokens[i])
            scores.append(state.log_scores[i])
    return HypothesisState(n=state.n, tokens=tuple(tokens), log_scores=tuple(scores), step=state.step + 1)


def _diff_step(
    old: HypothesisState,
    new: HypothesisState,
    filled: tuple[int, ...] | None,
) -> DecodeStep:
    old_masked = set(old.masked_positions)
    new_masked = set(new.masked_positions)
    unmasked = tuple(
        PositionPrediction(i, new.tokens[i], math.exp(new.log_scores[i]))
        for i in sorted(old_masked - new_masked)
    )
    remasked = tuple(sorted(new_masked - old_masked))
    revised = tuple(
        PositionPrediction(i, new.tokens[i], math.exp(new.log_scores[i]))
        for i in sorted(set(range(old.n)) - old_masked - new_masked)
        if new.tokens[i] != old.tokens[i]
    )
    return DecodeStep(
        unmasked=unmasked,
        mask_after=frozenset(new_masked),
        remasked=remasked,
        revised=revised,
        filled=filled,
    )


def decode(
    scorer: Scorer,
    src: Sequence[int],
    n: int,
    config: DecodeConfig,
    *,
    record_fills: bool = False,
) -> DecodeResult:
    """Decode a single hypothesis of length ``n`` for ``src``.

    The loop runs until the mask is empty, at most ``config.resolved_cap(n)``
    iterations; hitting the cap forces a full unmask of the remainder and is
    flagged on the trace.
    """
    if n < 1:
        raise ValueError(f"invalid hypothesis length {n}")
    state = new_hypothesis(n)
    cap = config.resolved_cap(n)
    steps: list[DecodeStep] = []
    cap_forced = False
    subset = config.update_strategy == "update-masked-sub"
    t_param = int(config.param) if config.heuristic == "fixed-T" else 0
    iteration = 0
    while not state.is_complete:
        iteration += 1
        all_positions = config.update_strategy == "update-all"
        preds = scorer.predictions(src, state, all_positions=all_positions)
        by_pos = {p.position: p for p in preds}
        masked_now = state.masked_positions
        if subset:
            if config.heuristic == "fixed-T" and config.fixed_t_decay:
                count = max(1, _schedule_count(n, t_param, iteration, len(masked_now), True))
                chosen = top_by_prob([by_pos[i] for i in masked_now], count)
            else:
                chosen = select_positions(
                    config.heuristic, [by_pos[i] for i in masked_now], n, config.param
                )
            if iteration >= cap and len(chosen) < len(masked_now):
                chosen = set(masked_now)
                cap_forced = True
            new_state = apply_unmask(state, [by_pos[i] for i in sorted(chosen)])
        else:
            count = _schedule_count(n, t_param, iteration, len(masked_now), config.fixed_t_decay)
            if iteration >= t_param:
                count = len(masked_now)
            elif iteration >= cap and count < len(masked_now):
                count = len(masked_now)
                cap_forced = True
            new_state = apply_update_strategy(state, preds, config.update_strategy, count)
        filled = _filled_tokens(state, new_state, by_pos) if record_fills else None
        steps.append(_diff_step(state, new_state, filled))
        state = new_state
    trace = DecodeTrace(
        n=n,
        steps=tuple(steps),
        final=state,
        heuristic=config.heuristic,
        param=config.param,
        update_strategy=config.update_strategy,
        cap_forced=cap_forced,
    )
    return DecodeResult(sequence=state.tokens, trace=trace)


def decode_with_length_beam(
    scorer: Scorer,
    src: Sequence[int],
    config: DecodeConfig,
    *,
    record_fills: bool = False,
) -> LengthBeamResult:
    """Decode one hypothesis per candidate length and keep the best one."""
    lengths = scorer.predict_lengths(src, config.length_beam)
    if not lengths:
        raise ValueError("length model proposed no candidates")
    candidates = []
    errors = []
    for n, prob in lengths:
        try:
            result = decode(scorer, src, n, config, record_fills=record_fills)
        except Exception as exc:
            errors.append((n, exc))
            continue
        candidates.append(LengthCandidate(n=n, length_prob=prob, result=result))
    if not candidates:
        raise RuntimeError(f"all length candidates failed: {errors}") from errors[0][1]
    selected = min(range(len(candidates)), key=lambda i: (-candidates[i].norm_score, candidates[i].n))
    return LengthBeamResult(candidates=tuple(candidates), selected_index=selected)


class MaskedDecoder(BaseEstimator):
    """Estimator-style front end over :func:`decode_with_length_beam`.

    ``predict`` maps a list of source token sequences to decoded target
    sequences. The decoder holds no mutable state, so ``fit`` is a no-op
    that exists for pipeline compatibility.
    """

    def __init__(
        self,
        scorer: Scorer | None = None,
        heuristic: str = "comb-thresh",
        param: float = 0.5,
        length_beam: int = 1,
        update_strategy: str = "update-masked-sub",
        max_iterations: int | None = None,
        fixed_t_decay: bool = False,
        jobs: int = 1,
    ) -> None:
        self.scorer = scorer
        self.heuristic = heuristic
        self.param = param
        self.length_beam = length_beam
        self.update_strategy = update_strategy
        self.max_iterations = max_iterations
        self.fixed_t_decay = fixed_t_decay
        self.jobs = jobs

    def config(self) -> DecodeConfig:
        return DecodeConfig(
            update_strategy=self.update_strategy,
            heuristic=self.heuristic,
            param=self.param,
            length_beam=self.length_beam,
            max_iterations=self.max_iterations,
            fixed_t_decay=self.fixed_t_decay,
        )

    def fit(self, X=None, y=None) -> "MaskedDecoder":
        return self

    def decode(self, src: Sequence[int], n: int | None = None, *, record_fills: bool = False) -> LengthBeamResult:
        if self.scorer is None:
            raise ValueError("a scorer must be set before decoding")
        if n is not None:
            result = decode(self.scorer, src, n, self.config(), record_fills=record_fills)
            return LengthBeamResult(
                candidates=(LengthCandidate(n=n, length_prob=1.0, result=result),),
                selected_index=0,
            )
        return decode_with_length_beam(self.scorer, src, self.config(), record_fills=record_fills)

    def predict(self, X: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
        def one(src):
            return self.decode(src).selected.result.sequence

        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                return list(pool.map(one, X))
        return [one(src) for src in X]
