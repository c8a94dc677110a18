"""Probabilistic accounting for masking sequences.

A subset-mode trace defines a factorization of the output: per iteration,
the committed tokens are conditionally independent given the tokens
already observed, and the mask choice itself is treated as deterministic,
so the trace probability is the product over iterations of the committed
tokens' conditionals. This module re-scores traces by fresh scorer
queries and searches the space of masking chains exhaustively for small
instances.

Chains are enumerated canonically: the next unmask block ranges over the
non-empty subsets of the current mask in lexicographic order of their
sorted position tuples, depth first. Ties in scores are resolved in favor
of the first chain in that order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .scorers.base import Scorer
from .types import MASK, DecodeTrace, HypothesisState
from .validation import check_token_sequence


class SearchBudgetExceeded(ValueError):
    """The instance admits more masking chains than the allowed budget."""


@dataclass(frozen=True)
class FactorizationScore:
    """Per-iteration log-probability terms and their total."""

    terms: tuple[float, ...]

    @property
    def total(self) -> float:
        return sum(self.terms)

    @property
    def prob(self) -> float:
        return math.exp(self.total)


@dataclass(frozen=True)
class BestFactorization:
    """Argmax masking chain for a fixed reference output."""

    blocks: tuple[tuple[int, ...], ...]
    score: FactorizationScore

    def mask_sets(self, n: int) -> list[frozenset[int]]:
        masks = [frozenset(range(n))]
        for block in self.blocks:
            masks.append(masks[-1] - set(block))
        return masks


@lru_cache(maxsize=None)
def ordered_partition_count(n: int) -> int:
    """Number of masking chains (ordered set partitions) of ``n`` positions."""
    if n == 0:
        return 1
    total = 0
    for k in range(1, n + 1):
        total += math.comb(n, k) * ordered_partition_count(n - k)
    return total


def lex_nonempty_subsets(positions: Sequence[int]) -> list[tuple[int, ...]]:
    """Non-empty subsets as sorted tuples, in lexicographic order."""
    items = tuple(sorted(positions))
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], start: int) -> None:
        for j in range(start, len(items)):
            cur = prefix + (items[j],)
            out.append(cur)
            rec(cur, j + 1)

    rec((), 0)
    return out


def trace_log_prob(scorer: Scorer, src: Sequence[int], trace: DecodeTrace) -> FactorizationScore:
    """Re-score a subset-mode trace by fresh scorer queries.

    Each iteration contributes the sum of log conditionals of the tokens it
    committed, evaluated on the state reconstructed from the preceding
    iterations.
    """
    if trace.update_strategy != "update-masked-sub":
        raise ValueError("only subset-mode traces define a factorization")
    trace.validate()
    tokens = [MASK] * trace.n
    scores = [math.nan] * trace.n
    terms = []
    for step_index, step in enumerate(trace.steps):
        state = HypothesisState(
            n=trace.n, tokens=tuple(tokens), log_scores=tuple(scores), step=step_index
        )
        dists = scorer.distributions(src, state)
        term = 0.0
        for pred in step.unmasked:
            term += float(np.log(dists[pred.position][pred.token]))
            tokens[pred.position] = pred.token
            scores[pred.position] = 0.0
        terms.append(term)
    return FactorizationScore(terms=tuple(terms))


def best_factorization(
    scorer: Scorer,
    src: Sequence[int],
    reference: Sequence[int],
    max_iterations: int | None = None,
    *,
    budget: int | None = None,
) -> BestFactorization:
    """Exhaustive argmax over masking chains for a fixed reference output.

    All chains of strictly shrinking masks (optionally at most
    ``max_iterations`` long) are scored; the guard refuses instances with
    more chains than ``budget`` (default: every N <= 8). Pass a larger
    budget explicitly to override.
    """
    reference = check_token_sequence(reference, "reference")
    n = len(reference)
    limit = budget if budget is not None else ordered_partition_count(8)
    if ordered_partition_count(n) > limit:
        raise SearchBudgetExceeded(
            f"{ordered_partition_count(n)} masking chains for N={n} exceed the budget of {limit}"
        )
    depth = n if max_iterations is None else min(max_iterations, n)
    if depth < 1:
        raise ValueError("max_iterations must allow at least one step")

    # One scorer query per distinct mask; tokens are pinned to the reference.
    logp_cache: dict[int, dict[int, float]] = {}

    def logp_at(mask_bits: int) -> dict[int, float]:
        cached = logp_cache.get(mask_bits)
        if cached is not None:
            return cached
        tokens = tuple(
            MASK if mask_bits >> i & 1 else reference[i] for i in range(n)
        )
        scores = tuple(math.nan if t == MASK else 0.0 for t in tokens)
        state = HypothesisState(n=n, tokens=tokens, log_scores=scores, step=0)
        dists = scorer.distributions(src, state)
        out = {i: float(np.log(dists[i][reference[i]])) for i in dists}
        logp_cache[mask_bits] = out
        return out

    memo: dict[tuple[int, int], tuple[float, tuple[tuple[int, ...], ...] | None]] = {}

    def solve(mask_bits: int, steps_left: int) -> tuple[float, tuple[tuple[int, ...], ...] | None]:
        if mask_bits == 0:
            return 0.0, ()
        if steps_left == 0:
            return -math.inf, None
        key = (mask_bits, steps_left)
        hit = memo.get(key)
        if hit is not None:
            return hit
        positions = [i for i in range(n) if mask_bits >> i & 1]
        logp = logp_at(mask_bits)
        best_score = -math.inf
        best_blocks: tuple[tuple[int, ...], ...] | None = None
        for block in lex_nonempty_subsets(positions):
            block_bits = 0
            term = 0.0
            for i in block:
                block_bits |= 1 << i
                term += logp[i]
            sub_score, sub_blocks = solve(mask_bits ^ block_bits, steps_left - 1)
            if sub_blocks is None:
                continue
            total = term + sub_score
            if total > best_score:
                best_score = total
                best_blocks = (block,) + sub_blocks
        memo[key] = (best_score, best_blocks)
        return best_score, best_blocks

    score, blocks = solve((1 << n) - 1, depth)
    assert blocks is not None
    terms = []
    mask_bits = (1 << n) - 1
    for block in blocks:
        logp = logp_at(mask_bits)
        terms.append(sum(logp[i] for i in block))
        for i in block:
            mask_bits ^= 1 << i
    return BestFactorization(blocks=blocks, score=FactorizationScore(terms=tuple(terms)))


def best_output_search(
    scorer: Scorer,
    src: Sequence[int],
    n: int,
    target_vocab_size: int,
    max_iterations: int | None = None,
) -> tuple[tuple[int, ...], BestFactorization]:
    """Joint argmax over outputs and masking chains, for tiny instances only."""
    if n < 1 or n > 4 or target_vocab_size < 2 or target_vocab_size > 4:
        raise ValueError("joint search is limited to N <= 4 and vocabularies of size <= 4")
    best: tuple[tuple[int, ...], BestFactorization] | None = None
    for y in itertools.product(range(target_vocab_size), repeat=n):
        fact = best_factorization(scorer, src, y, max_iterations)
        if best is None or fact.score.total > best[1].score.total:
            best = (y, fact)
    assert best is not None
    return best
