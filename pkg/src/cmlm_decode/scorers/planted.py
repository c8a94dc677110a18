"""Exact synthetic translation model with computable conditionals.

Each source sequence selects, through a seeded hash, an initial
distribution and a row-stochastic transition matrix over the target
vocabulary; the target is a Markov chain under those parameters and the
output length follows a triangular distribution centered at the source
length. Posterior marginals at masked positions given any set of observed
tokens are computed exactly by a clamped forward-backward pass, which is
what makes this model usable as a verification stand-in for a trained
masked language model.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..types import MASK, HypothesisState, new_hypothesis
from ..validation import check_token_sequence
from .base import Scorer, stable_hash, top_lengths, triangular_length_probs


def constrained_marginals(
    pi: np.ndarray, trans: np.ndarray, tokens: Sequence[int]
) -> dict[int, np.ndarray]:
    """Posterior marginals at masked positions of a clamped Markov chain.

    ``tokens`` holds one entry per position, :data:`MASK` where free.
    Returns the exact ``p(y_i | observed tokens)`` for every masked ``i``.
    """
    n = len(tokens)
    v = pi.shape[0]

    def clamp(vec: np.ndarray, tok: int) -> np.ndarray:
        if tok == MASK:
            return vec
        out = np.zeros_like(vec)
        out[tok] = vec[tok]
        return out

    alpha = np.empty((n, v))
    a = clamp(pi, tokens[0])
    alpha[0] = a / a.sum()
    for i in range(1, n):
        a = clamp(alpha[i - 1] @ trans, tokens[i])
        alpha[i] = a / a.sum()

    beta = np.empty((n, v))
    beta[n - 1] = 1.0
    for i in range(n - 2, -1, -1):
        b = trans @ clamp(beta[i + 1], tokens[i + 1])
        beta[i] = b / b.max()

    out: dict[int, np.ndarray] = {}
    for i in range(n):
        if tokens[i] == MASK:
            post = alpha[i] * beta[i]
            out[i] = post / post.sum()
    return out


class PlantedMarkovScorer(BaseEstimator, Scorer):
    """Seeded Markov translation model with exact conditionals.

    Parameters
    ----------
    source_vocab_size, target_vocab_size : int
        Alphabet sizes for inputs and outputs.
    seed : int
        Selects the whole family of per-source parameters; equal seeds give
        bit-identical models.
    concentration : float
        Dirichlet concentration of the sampled rows; smaller is spikier.
    uniform_mix : float
        Uniform mass mixed into every row, keeping entries strictly positive.
    """

    def __init__(
        self,
        source_vocab_size: int = 10,
        target_vocab_size: int = 6,
        seed: int = 0,
        concentration: float = 0.05,
        uniform_mix: float = 0.05,
    ) -> None:
        self.source_vocab_size = source_vocab_size
        self.target_vocab_size = target_vocab_size
        self.seed = seed
        self.concentration = concentration
        self.uniform_mix = uniform_mix
        self._param_cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    # -- parameters -------------------------------------------------------

    def params_for(self, src: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Initial distribution and transition matrix selected by ``src``."""
        key = check_token_sequence(src, "src", self.source_vocab_size)
        cached = self._param_cache.get(key)
        if cached is not None:
            return cached
        rng = np.random.default_rng([self.seed, stable_hash(key)])
        v = self.target_vocab_size
        conc = np.full(v, self.concentration)
        uniform = np.full(v, 1.0 / v)
        pi = (1.0 - self.uniform_mix) * rng.dirichlet(conc) + self.uniform_mix * uniform
        pi /= pi.sum()
        trans = np.empty((v, v))
        for row in range(v):
            r = (1.0 - self.uniform_mix) * rng.dirichlet(conc) + self.uniform_mix * uniform
            trans[row] = r / r.sum()
        pi.setflags(write=False)
        trans.setflags(write=False)
        self._param_cache[key] = (pi, trans)
        return pi, trans

    def length_probs(self, src: Sequence[int]) -> dict[int, float]:
        src = check_token_sequence(src, "src", self.source_vocab_size)
        return triangular_length_probs(len(src))

    # -- scorer contract --------------------------------------------------

    def distributions(
        self, src: Sequence[int], state: HypothesisState, *, all_positions: bool = False
    ) -> dict[int, np.ndarray]:
        pi, trans = self.params_for(src)
        for tok in state.tokens:
            if tok != MASK and tok >= self.target_vocab_size:
                raise ValueError(f"observed token {tok} outside target vocabulary")
        out = constrained_marginals(pi, trans, state.tokens)
        if all_positions:
            # Committed positions get their leave-one-out posterior: clamp
            # everything else, free the position itself.
            for i, tok in enumerate(state.tokens):
                if tok == MASK:
                    continue
                loo = list(state.tokens)
                loo[i] = MASK
                out[i] = constrained_marginals(pi, trans, loo)[i]
        return out

    def predict_lengths(self, src: Sequence[int], beam: int) -> list[tuple[int, float]]:
        return top_lengths(self.length_probs(src), beam)

    # -- exact quantities and sampling ------------------------------------

    def sequence_log_prob(self, src: Sequence[int], target: Sequence[int]) -> float:
        """log p(target | src, N) under the planted chain."""
        target = check_token_sequence(target, "target", self.target_vocab_size)
        pi, trans = self.params_for(src)
        total = float(np.log(pi[target[0]]))
        for prev, cur in zip(target, target[1:]):
            total += float(np.log(trans[prev, cur]))
        return total

    def marginals(self, src: Sequence[int], n: int) -> dict[int, np.ndarray]:
        """Unconstrained per-position marginals for a fully masked length-``n`` output."""
        return self.distributions(src, new_hypothesis(n))

    def sample_target(self, src: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
        """Draw (N, chain) from the planted joint given ``src``."""
        probs = self.length_probs(src)
        lengths = sorted(probs)
        weights = np.array([probs[n] for n in lengths])
        n = lengths[int(rng.choice(len(lengths), p=weights / weights.sum()))]
        pi, trans = self.params_for(src)

        def draw(row: np.ndarray) -> int:
            idx = int(np.searchsorted(np.cumsum(row), rng.random()))
            return min(idx, row.size - 1)

        out = [draw(pi)]
        for _ in range(n - 1):
            out.append(draw(trans[out[-1]]))
        return tuple(out)

    def sample_source(self, rng: np.random.Generator, length_range: tuple[int, int]) -> tuple[int, ...]:
        lo, hi = length_range
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid source length range {length_range}")
        n = int(rng.integers(lo, hi + 1))
        return tuple(int(t) for t in rng.integers(0, self.source_vocab_size, size=n))

    def sample_source_pool(self, size: int, length_range: tuple[int, int]) -> tuple[tuple[int, ...], ...]:
        """A fixed pool of distinct sources, derived from the model seed.

        Corpora restricted to a pool keep the count scorer's source-hash
        buckets informative, which is what its bucketed contexts need to
        pick up the per-source structure.
        """
        if size < 1:
            raise ValueError("pool size must be >= 1")
        rng = np.random.default_rng([self.seed, 13])
        pool: list[tuple[int, ...]] = []
        seen = set()
        while len(pool) < size:
            src = self.sample_source(rng, length_range)
            if src not in seen:
                seen.add(src)
                pool.append(src)
        return tuple(pool)
