"""Input validation helpers used at API boundaries."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .types import MASK


def check_positive_int(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_token_sequence(seq: Sequence[int], name: str, vocab_size: int | None = None) -> tuple[int, ...]:
    """Validate a non-empty sequence of token ids (no MASK entries)."""
    out = tuple(int(t) for t in seq)
    if not out:
        raise ValueError(f"{name} must be non-empty")
    for t in out:
        if t == MASK or t < 0:
            raise ValueError(f"{name} contains invalid token id {t}")
        if vocab_size is not None and t >= vocab_size:
            raise ValueError(f"{name} token id {t} out of range for vocabulary of size {vocab_size}")
    return out


def check_distribution(dist: np.ndarray, name: str, tol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within ``tol``."""
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or dist.size < 1:
        raise ValueError(f"{name} must be a 1-d probability vector")
    if np.any(dist < 0):
        raise ValueError(f"{name} has negative entries")
    total = float(dist.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} sums to {total}, expected 1 within {tol}")
    return dist
