"""Count-based masked language model trained with uniform mask sampling.

The model predicts a masked token from a small context signature: the
immediate left and right neighbors (token, MASK, or a boundary marker), a
relative-position bucket, and a source-hash bucket. Training draws a mask
size S uniformly from {1..N} per example, masks S positions chosen without
replacement, and counts each masked token against its context. Add-alpha
smoothing keeps every queried distribution proper, including for contexts
never seen in training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..types import MASK, HypothesisState
from ..validation import check_positive_int, check_token_sequence
from .base import Scorer, stable_hash, top_lengths

#: Context marker for positions before the first / after the last token.
BOUNDARY = -2

Context = tuple[int, int, int, int]


@dataclass(frozen=True)
class TrainingConfig:
    """Sampling settings for :func:`train_count_cmlm`.

    ``sources`` optionally restricts training to a fixed pool of source
    sequences; otherwise sources are drawn uniformly at random with lengths
    in ``source_length_range``.
    """

    num_examples: int
    seed: int = 0
    source_length_range: tuple[int, int] = (3, 10)
    sources: tuple[tuple[int, ...], ...] | None = None
    alpha: float = 0.1


class CountScorer(BaseEstimator, Scorer):
    """Context-count CMLM with add-alpha smoothing.

    Fitting consumes (source, target) pairs and performs the random-mask
    training procedure internally, seeded by ``random_state``. The fitted
    model is immutable and safe for concurrent queries.
    """

    def __init__(
        self,
        alpha: float = 0.1,
        position_buckets: int = 4,
        source_buckets: int = 16,
        target_vocab_size: int | None = None,
        random_state: int = 0,
    ) -> None:
        self.alpha = alpha
        self.position_buckets = position_buckets
        self.source_buckets = source_buckets
        self.target_vocab_size = target_vocab_size
        self.random_state = random_state

    # -- training ----------------------------------------------------------

    def fit(self, pairs: Iterable[tuple[Sequence[int], Sequence[int]]]) -> "CountScorer":
        if self.alpha <= 0:
            raise ValueError("smoothing alpha must be positive")
        rng = np.random.default_rng(self.random_state)
        counts: dict[Context, np.ndarray] = {}
        length_counts: dict[tuple[int, int], dict[int, int]] = {}
        vocab_size = self.target_vocab_size or 0
        max_len = 0
        n_examples = 0
        for src, tgt in pairs:
            src = check_token_sequence(src, "src")
            tgt = check_token_sequence(tgt, "tgt")
            n = len(tgt)
            n_examples += 1
            max_len = max(max_len, n)
            if self.target_vocab_size is None:
                vocab_size = max(vocab_size, max(tgt) + 1)
            elif max(tgt) >= self.target_vocab_size:
                raise ValueError("target token outside declared vocabulary")
            bucket = self._source_bucket(src)
            lkey = (len(src), bucket)
            length_counts.setdefault(lkey, {})
            length_counts[lkey][n] = length_counts[lkey].get(n, 0) + 1

            size = int(rng.integers(1, n + 1))
            masked = rng.choice(n, size=size, replace=False)
            tokens = list(tgt)
            for i in masked:
                tokens[i] = MASK
            for i in sorted(int(i) for i in masked):
                ctx = self._context(tokens, i, bucket)
                row = counts.get(ctx)
                if row is None:
                    row = counts[ctx] = np.zeros(max(vocab_size, 1), dtype=np.int64)
                elif row.size < vocab_size:
                    row = counts[ctx] = np.concatenate([row, np.zeros(vocab_size - row.size, dtype=np.int64)])
                row[tgt[i]] += 1
        if n_examples == 0:
            raise ValueError("training requires at least one example")
        self.vocab_size_ = vocab_size
        self.max_target_len_ = max_len
        self.counts_ = {
            ctx: (np.concatenate([row, np.zeros(vocab_size - row.size, dtype=np.int64)]) if row.size < vocab_size else row)
            for ctx, row in counts.items()
        }
        self.length_counts_ = length_counts
        self._dist_cache: dict[Context, np.ndarray] = {}
        return self

    # -- context signature ---------------------------------------------------

    def _source_bucket(self, src: Sequence[int]) -> int:
        return stable_hash(tuple(src), 9173) % self.source_buckets

    def _context(self, tokens: Sequence[int], i: int, src_bucket: int) -> Context:
        n = len(tokens)
        left = tokens[i - 1] if i > 0 else BOUNDARY
        right = tokens[i + 1] if i < n - 1 else BOUNDARY
        pos_bucket = min(self.position_buckets - 1, i * self.position_buckets // n)
        return (left, right, pos_bucket, src_bucket)

    def _smoothed(self, ctx: Context) -> np.ndarray:
        cached = self._dist_cache.get(ctx)
        if cached is not None:
            return cached
        row = self.counts_.get(ctx)
        v = self.vocab_size_
        if row is None:
            dist = np.full(v, 1.0 / v)
        else:
            dist = (row + self.alpha) / (row.sum() + self.alpha * v)
        dist.setflags(write=False)
        self._dist_cache[ctx] = dist
        return dist

    # -- scorer contract -----------------------------------------------------

    def distributions(
        self, src: Sequence[int], state: HypothesisState, *, all_positions: bool = False
    ) -> dict[int, np.ndarray]:
        src = check_token_sequence(src, "src")
        bucket = self._source_bucket(src)
        out: dict[int, np.ndarray] = {}
        for i, tok in enumerate(state.tokens):
            if tok == MASK or all_positions:
                out[i] = self._smoothed(self._context(state.tokens, i, bucket))
        return out

    def predict_lengths(self, src: Sequence[int], beam: int) -> list[tuple[int, float]]:
        src = check_token_sequence(src, "src")
        check_positive_int(beam, "beam")
        observed = self.length_counts_.get((len(src), self._source_bucket(src)), {})
        support = range(1, self.max_target_len_ + 2)
        total = sum(observed.values()) + self.alpha * len(support)
        probs = {n: (observed.get(n, 0) + self.alpha) / total for n in support}
        return top_lengths(probs, beam)

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "alpha": self.alpha,
            "position_buckets": self.position_buckets,
            "source_buckets": self.source_buckets,
            "random_state": self.random_state,
            "vocab_size": self.vocab_size_,
            "max_target_len": self.max_target_len_,
            "contexts": {",".join(map(str, ctx)): row.tolist() for ctx, row in sorted(self.counts_.items())},
            "lengths": {
                ",".join(map(str, key)): dict(sorted(cnt.items()))
                for key, cnt in sorted(self.length_counts_.items())
            },
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CountScorer":
        payload = json.loads(text)
        model = cls(
            alpha=payload["alpha"],
            position_buckets=payload["position_buckets"],
            source_buckets=payload["source_buckets"],
            target_vocab_size=payload["vocab_size"],
            random_state=payload["random_state"],
        )
        model.vocab_size_ = payload["vocab_size"]
        model.max_target_len_ = payload["max_target_len"]
        model.counts_ = {
            tuple(int(x) for x in key.split(",")): np.asarray(row, dtype=np.int64)
            for key, row in payload["contexts"].items()
        }
        model.length_counts_ = {
            tuple(int(x) for x in key.split(",")): {int(n): int(c) for n, c in cnt.items()}
            for key, cnt in payload["lengths"].items()
        }
        model._dist_cache = {}
        return model


def train_count_cmlm(config: TrainingConfig, data_source) -> CountScorer:
    """Fit a :class:`CountScorer` on pairs sampled from a planted model."""
    if config.num_examples < 1:
        raise ValueError("training requires at least one example")
    rng = np.random.default_rng([config.seed, 11])
    pairs = []
    for _ in range(config.num_examples):
        if config.sources is not None:
            src = config.sources[int(rng.integers(len(config.sources)))]
        else:
            src = data_source.sample_source(rng, config.source_length_range)
        pairs.append((src, data_source.sample_target(src, rng)))
    model = CountScorer(
        alpha=config.alpha,
        target_vocab_size=data_source.target_vocab_size,
        random_state=config.seed + 1,
    )
    return model.fit(pairs)
