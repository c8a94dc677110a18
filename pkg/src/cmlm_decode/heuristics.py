"""Greedy position-selection heuristics for one unmasking iteration.

Every function receives the argmax predictions for the currently masked
positions and returns the set of positions to commit. Ranking by
probability breaks ties by lower position index; every heuristic commits
at least one position (the thresholding ones fall back to the single
highest-ranked prediction when their criterion admits nothing).
"""

from __future__ import annotations

import math
from typing import Sequence

from .types import PositionPrediction
from .validation import check_positive_int, check_unit_interval


def ranked(preds: Sequence[PositionPrediction]) -> list[PositionPrediction]:
    """Predictions by descending probability, ties by lower position."""
    return sorted(preds, key=lambda p: (-p.prob, p.position))


def _require(preds: Sequence[PositionPrediction]) -> None:
    if not preds:
        raise ValueError("prediction list must be non-empty")


def top_by_prob(preds: Sequence[PositionPrediction], count: int) -> set[int]:
    """The ``count`` highest-probability positions (clamped to what exists)."""
    _require(preds)
    count = max(1, min(count, len(preds)))
    return {p.position for p in ranked(preds)[:count]}


def select_fixed_t(preds: Sequence[PositionPrediction], n: int, t: int) -> set[int]:
    """Unmask the ceil(N/T) highest-probability predictions."""
    _require(preds)
    check_positive_int(t, "T")
    return top_by_prob(preds, math.ceil(n / t))


def select_fixed_k(preds: Sequence[PositionPrediction], k: int) -> set[int]:
    """Unmask a constant K predictions per iteration."""
    _require(preds)
    check_positive_int(k, "K")
    return top_by_prob(preds, k)


def select_thresh(preds: Sequence[PositionPrediction], tau: float) -> set[int]:
    """All predictions with probability strictly above ``tau``."""
    _require(preds)
    check_unit_interval(tau, "tau")
    chosen = {p.position for p in preds if p.prob > tau}
    if not chosen:
        return top_by_prob(preds, 1)
    return chosen


def select_comb_thresh(preds: Sequence[PositionPrediction], tau: float) -> set[int]:
    """The largest highest-ranked prefix whose joint probability exceeds ``tau``."""
    _require(preds)
    check_unit_interval(tau, "tau")
    order = ranked(preds)
    log_tau = math.log(tau) if tau > 0 else -math.inf
    best = 0
    acc = 0.0
    for i, p in enumerate(order, start=1):
        acc += p.log_prob
        if acc > log_tau:
            best = i
    if best == 0:
        return top_by_prob(preds, 1)
    return {p.position for p in order[:best]}


def select_fcomb_thresh(preds: Sequence[PositionPrediction], tau: float) -> set[int]:
    """Largest prefix Y with p(Y) * (1 - p(complement)) above ``tau``.

    Both factors are products of the member predictions' probabilities; the
    empty product is 1, so the full prefix always scores 0.
    """
    _require(preds)
    check_unit_interval(tau, "tau")
    order = ranked(preds)
    total_log = sum(p.log_prob for p in order)
    best = 0
    acc = 0.0
    for i, p in enumerate(order, start=1):
        acc += p.log_prob
        complement = math.exp(total_log - acc) if i < len(order) else 1.0
        if math.exp(acc) * (1.0 - complement) > tau:
            best = i
    if best == 0:
        return top_by_prob(preds, 1)
    return {p.position for p in order[:best]}


def select_positions(
    heuristic: str, preds: Sequence[PositionPrediction], n: int, param: float
) -> set[int]:
    """Dispatch one iteration's selection by heuristic name."""
    if heuristic == "fixed-T":
        return select_fixed_t(preds, n, int(param))
    if heuristic == "fixed-K":
        return select_fixed_k(preds, int(param))
    if heuristic == "thresh":
        return select_thresh(preds, param)
    if heuristic == "comb-thresh":
        return select_comb_thresh(preds, param)
    if heuristic == "fcomb-thresh":
        return select_fcomb_thresh(preds, param)
    raise ValueError(f"unknown heuristic {heuristic!r}")
