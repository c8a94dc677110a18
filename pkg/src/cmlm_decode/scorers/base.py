"""Scorer contract shared by the planted, count-based and external models.

A scorer answers two queries: full per-position distributions over the
target vocabulary for the masked positions of a hypothesis (optionally for
all positions), and the most probable output lengths for a source.
Scorers are immutable once constructed or fitted and safe to query from
concurrent workers.
"""

from __future__ import annotations

import abc
import hashlib
from typing import Mapping, Sequence

import numpy as np

from ..types import HypothesisState, PositionPrediction


def stable_hash(seq: Sequence[int], *salts: int) -> int:
    """Platform-stable 63-bit hash of an integer sequence."""
    h = hashlib.blake2b(digest_size=8)
    for s in salts:
        h.update(int(s).to_bytes(8, "little", signed=True))
    for t in seq:
        h.update(int(t).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little") & (2**63 - 1)


def triangular_length_probs(src_len: int, spread: int = 2) -> dict[int, float]:
    """Discretized triangular length distribution centered at ``src_len``.

    Support is {max(1, src_len-spread) .. src_len+spread} with weight
    ``spread + 1 - |n - src_len|``, renormalized over the support.
    """
    if src_len < 1:
        raise ValueError("source length must be >= 1")
    lo = max(1, src_len - spread)
    hi = src_len + spread
    weights = {n: spread + 1 - abs(n - src_len) for n in range(lo, hi + 1)}
    total = sum(weights.values())
    return {n: w / total for n, w in weights.items()}


def top_lengths(probs: Mapping[int, float], beam: int) -> list[tuple[int, float]]:
    """The ``beam`` most probable lengths, ties broken by smaller length."""
    if beam < 1:
        raise ValueError("length beam must be >= 1")
    ranked = sorted(probs.items(), key=lambda item: (-item[1], item[0]))
    return ranked[: min(beam, len(ranked))]


class Scorer(abc.ABC):
    """Conditional scorer for masked positions plus a length model."""

    @abc.abstractmethod
    def distributions(
        self, src: Sequence[int], state: HypothesisState, *, all_positions: bool = False
    ) -> dict[int, np.ndarray]:
        """Per-position distributions over the target vocabulary.

        Returns an entry for every masked position of ``state``; with
        ``all_positions`` also for committed ones (there conditioned on the
        remaining observed tokens, leaving the position itself out).
        """

    @abc.abstractmethod
    def predict_lengths(self, src: Sequence[int], beam: int) -> list[tuple[int, float]]:
        """The ``beam`` most probable output lengths with probabilities, descending."""

    def predictions(
        self, src: Sequence[int], state: HypothesisState, *, all_positions: bool = False
    ) -> list[PositionPrediction]:
        """Argmax prediction per queried position, ties by lowest token id."""
        dists = self.distributions(src, state, all_positions=all_positions)
        preds = []
        for pos in sorted(dists):
            dist = dists[pos]
            token = int(np.argmax(dist))
            prob = min(float(dist[token]), 1.0)
            preds.append(PositionPrediction(position=pos, token=token, prob=prob))
        return preds

    def close(self) -> None:
        """Release external resources; a no-op for in-process scorers."""
