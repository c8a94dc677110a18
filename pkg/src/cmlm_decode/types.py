"""Value types shared across the decoding engine.

Positions are 0-based everywhere; renderers may display them 1-based.
Per-position scores are kept in log space internally and exposed as linear
probabilities at API boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

#: Vocabulary-level sentinel marking a masked position. Valid token ids are >= 0.
MASK = -1

TokenSeq = tuple[int, ...]

UPDATE_STRATEGIES = ("update-all", "update-masked", "update-masked-sub")
HEURISTICS = ("fixed-T", "fixed-K", "thresh", "comb-thresh", "fcomb-thresh")
#: Heuristics whose hyperparameter is a positive integer count.
COUNT_HEURISTICS = ("fixed-T", "fixed-K")
#: Heuristics whose hyperparameter is a threshold in [0, 1].
THRESHOLD_HEURISTICS = ("thresh", "comb-thresh", "fcomb-thresh")


class SubsetViolation(ValueError):
    """An update touched a position outside the current mask set."""


class ProgressViolation(ValueError):
    """An update would commit no position at all."""


@dataclass(frozen=True)
class Vocab:
    """Dense token alphabet with a reserved MASK sentinel.

    Symbol ids are their indices (0..V-1); :data:`MASK` is never a valid
    output token.
    """

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.symbols) < 2:
            raise ValueError("vocabulary needs at least 2 symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("vocabulary symbols must be distinct")

    @classmethod
    def from_size(cls, size: int, prefix: str = "t") -> "Vocab":
        return cls(tuple(f"{prefix}{i}" for i in range(size)))

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def mask_id(self) -> int:
        return MASK

    def symbol(self, token: int) -> str:
        if token == MASK:
            return "<mask>"
        return self.symbols[token]


@dataclass(frozen=True)
class Example:
    """A source sequence with an optional reference translation."""

    src: TokenSeq
    ref: TokenSeq | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "src", tuple(self.src))
        if self.ref is not None:
            object.__setattr__(self, "ref", tuple(self.ref))
        if not self.src:
            raise ValueError("source sequence must be non-empty")
        if self.ref is not None and not self.ref:
            raise ValueError("reference sequence must be non-empty when present")
        for name, seq in (("src", self.src), ("ref", self.ref or ())):
            if any(t < 0 for t in seq):
                raise ValueError(f"{name} contains a negative or MASK token id")


@dataclass(frozen=True)
class PositionPrediction:
    """Argmax token and its linear probability for one position."""

    position: int
    token: int
    prob: float

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError("position must be non-negative")
        if self.token == MASK or self.token < 0:
            raise ValueError("predicted token must be a valid output token")
        if not (0.0 < self.prob <= 1.0):
            raise ValueError(f"probability must lie in (0, 1], got {self.prob!r}")

    @property
    def log_prob(self) -> float:
        return math.log(self.prob)


@dataclass(frozen=True)
class HypothesisState:
    """A partial output of fixed length.

    ``tokens[i]`` is :data:`MASK` exactly where position ``i`` is still
    masked; ``log_scores[i]`` is the log probability recorded when the
    position was committed (NaN while masked). ``step`` counts applied
    updates.
    """

    n: int
    tokens: TokenSeq
    log_scores: tuple[float, ...]
    step: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("hypothesis length must be >= 1")
        if len(self.tokens) != self.n or len(self.log_scores) != self.n:
            raise ValueError("tokens/log_scores length must equal n")
        for tok, ls in zip(self.tokens, self.log_scores):
            if tok == MASK:
                if not math.isnan(ls):
                    raise ValueError("masked positions must carry NaN scores")
            elif tok < 0:
                raise ValueError(f"invalid token id {tok}")
            elif not ls <= 0.0:
                raise ValueError("committed positions need a log score <= 0")

    @property
    def masked_positions(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.tokens) if t == MASK)

    @property
    def is_complete(self) -> bool:
        return MASK not in self.tokens

    @property
    def scores(self) -> tuple[float, ...]:
        """Linear probabilities; NaN at masked positions."""
        return tuple(math.exp(s) if not math.isnan(s) else math.nan for s in self.log_scores)

    def mean_log_score(self) -> float:
        """Length-normalized model score of a complete hypothesis."""
        if not self.is_complete:
            raise ValueError("hypothesis still contains masked positions")
        return sum(self.log_scores) / self.n


def new_hypothesis(n: int) -> HypothesisState:
    """Fully masked state of length ``n`` at step 0."""
    if n < 1:
        raise ValueError(f"invalid hypothesis length {n}")
    return HypothesisState(n=n, tokens=(MASK,) * n, log_scores=(math.nan,) * n, step=0)


def apply_unmask(state: HypothesisState, chosen: Iterable[PositionPrediction]) -> HypothesisState:
    """Commit ``chosen`` predictions at currently masked positions.

    The mask strictly shrinks; committed tokens and scores are frozen.
    Raises :class:`ProgressViolation` for an empty choice and
    :class:`SubsetViolation` if a chosen position is not currently masked.
    """
    chosen = tuple(chosen)
    if not chosen:
        raise ProgressViolation("at least one position must be unmasked per update")
    seen: set[int] = set()
    tokens = list(state.tokens)
    scores = list(state.log_scores)
    for pred in chosen:
        if pred.position >= state.n:
            raise SubsetViolation(f"position {pred.position} outside hypothesis of length {state.n}")
        if pred.position in seen:
            raise SubsetViolation(f"position {pred.position} chosen twice")
        if state.tokens[pred.position] != MASK:
            raise SubsetViolation(f"position {pred.position} is not masked")
        seen.add(pred.position)
        tokens[pred.position] = pred.token
        scores[pred.position] = pred.log_prob
    return HypothesisState(n=state.n, tokens=tuple(tokens), log_scores=tuple(scores), step=state.step + 1)


@dataclass(frozen=True)
class DecodeStep:
    """One engine iteration: commits, optional re-masks and revisions."""

    unmasked: tuple[PositionPrediction, ...]
    mask_after: frozenset[int]
    remasked: tuple[int, ...] = ()
    revised: tuple[PositionPrediction, ...] = ()
    #: Greedy completion after this iteration (committed tokens plus the
    #: iteration's argmax at positions still masked). Recorded on request.
    filled: TokenSeq | None = None


@dataclass(frozen=True)
class DecodeTrace:
    """Ordered record of mask sets and unmasked tokens over one decode."""

    n: int
    steps: tuple[DecodeStep, ...]
    final: HypothesisState
    heuristic: str
    param: float
    update_strategy: str = "update-masked-sub"
    cap_forced: bool = False

    @property
    def iterations(self) -> int:
        return len(self.steps)

    def mask_sets(self) -> list[frozenset[int]]:
        """M^(0)..M^(T), starting from the all-masked set."""
        return [frozenset(range(self.n))] + [s.mask_after for s in self.steps]

    def validate(self) -> None:
        """Check the structural invariants for this trace's strategy."""
        masks = self.mask_sets()
        if masks[-1]:
            raise ValueError("trace does not end with an empty mask")
        subset = self.update_strategy == "update-masked-sub"
        for t, step in enumerate(self.steps, start=1):
            before, after = masks[t - 1], masks[t]
            newly = frozenset(p.position for p in step.unmasked)
            if subset:
                if not after < before:
                    raise SubsetViolation(f"step {t}: mask must shrink strictly")
                if newly != before - after:
                    raise ValueError(f"step {t}: unmasked set does not match mask difference")
                if step.remasked:
                    raise SubsetViolation(f"step {t}: re-masking not allowed under subset updates")
            else:
                expect = (before - newly) | frozenset(step.remasked)
                if after != expect:
                    raise ValueError(f"step {t}: inconsistent mask bookkeeping")
        committed = {p.position for s in self.steps for p in s.unmasked}
        if subset and committed != set(range(self.n)):
            raise ValueError("union of unmasked sets must cover all positions")

    def replay(self) -> HypothesisState:
        """Re-apply all steps through :func:`apply_unmask` (subset traces only)."""
        if self.update_strategy != "update-masked-sub":
            raise ValueError("only subset-mode traces can be replayed")
        state = new_hypothesis(self.n)
        for step in self.steps:
            state = apply_unmask(state, step.unmasked)
        return state


def build_trace(
    n: int,
    blocks: Sequence[Sequence[tuple[int, int, float]]],
    heuristic: str = "manual",
    param: float = 0.0,
) -> DecodeTrace:
    """Assemble a subset-mode trace from per-iteration (position, token, prob) blocks."""
    state = new_hypothesis(n)
    steps = []
    for block in blocks:
        preds = tuple(PositionPrediction(p, tok, prob) for p, tok, prob in block)
        state = apply_unmask(state, preds)
        steps.append(DecodeStep(unmasked=preds, mask_after=frozenset(state.masked_positions)))
    trace = DecodeTrace(n=n, steps=tuple(steps), final=state, heuristic=heuristic, param=param)
    trace.validate()
    return trace


@dataclass(frozen=True)
class DecodeConfig:
    """Engine settings: update strategy, heuristic, and hyperparameters.

    ``param`` is T or K (positive integer) for the counting heuristics and
    a threshold in [0, 1] for the thresholding ones. ``length_beam`` is the
    number of candidate lengths decoded independently. ``max_iterations``
    caps runaway loops; ``None`` picks 2N (never below T for fixed-T).
    ``fixed_t_decay`` switches fixed-T to the decaying re-mask schedule
    that keeps floor(N*(T-t)/T) positions masked after iteration t.
    """

    update_strategy: str = "update-masked-sub"
    heuristic: str = "comb-thresh"
    param: float = 0.5
    length_beam: int = 1
    max_iterations: int | None = None
    fixed_t_decay: bool = False

    def __post_init__(self) -> None:
        if self.update_strategy not in UPDATE_STRATEGIES:
            raise ValueError(f"unknown update strategy {self.update_strategy!r}")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if self.heuristic in COUNT_HEURISTICS:
            if self.param != int(self.param) or int(self.param) < 1:
                raise ValueError(f"{self.heuristic} needs a positive integer hyperparameter")
        else:
            if not (0.0 <= self.param <= 1.0):
                raise ValueError(f"{self.heuristic} needs a threshold in [0, 1]")
        if self.update_strategy != "update-masked-sub" and self.heuristic != "fixed-T":
            raise ValueError("re-masking strategies run with the fixed-T schedule only")
        if self.length_beam < 1:
            raise ValueError("length beam must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1 when given")
        if self.fixed_t_decay and self.heuristic != "fixed-T":
            raise ValueError("the decaying schedule applies to fixed-T only")

    def resolved_cap(self, n: int) -> int:
        """Effective iteration cap for a hypothesis of length ``n``."""
        if self.max_iterations is not None:
            return self.max_iterations
        cap = 2 * n
        if self.heuristic == "fixed-T":
            cap = max(cap, int(self.param))
        return cap
