"""Corpus metrics and analyses: BLEU, speedup, curves, and tau tuning.

Speedup is the total number of generated tokens divided by the total
number of decode iterations over a corpus. With a length beam the counts
follow the selected candidate: the competing lengths decode on parallel
lanes and do not add iterations.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .engine import LengthBeamResult, MaskedDecoder
from .scorers.base import Scorer
from .types import DecodeConfig, Example


def _ngrams(seq: Sequence[int], order: int) -> Counter:
    return Counter(tuple(seq[i : i + order]) for i in range(len(seq) - order + 1))


def corpus_bleu(
    hypotheses: Sequence[Sequence[int]],
    references: Sequence[Sequence[int]],
    max_order: int = 4,
    smooth: bool = False,
) -> float:
    """Corpus BLEU in [0, 100]: clipped n-gram precisions up to ``max_order``
    under a geometric mean, times the brevity penalty exp(1 - r/c) for c < r.

    Unsmoothed by default; ``smooth`` switches every precision to
    (matches + 1) / (candidates + 1) for tiny corpora where higher-order
    matches are impossible.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference lists must have equal length")
    if not hypotheses:
        raise ValueError("BLEU is undefined for an empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = tuple(hyp)
        ref = tuple(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for order in range(1, max_order + 1):
            got = _ngrams(hyp, order)
            want = _ngrams(ref, order)
            totals[order - 1] += sum(got.values())
            matches[order - 1] += sum((got & want).values())
    log_precision = 0.0
    for m, t in zip(matches, totals):
        if smooth:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_precision += math.log(m / t)
    log_precision /= max_order
    brevity = 0.0 if hyp_len >= ref_len else 1.0 - ref_len / max(hyp_len, 1)
    return 100.0 * math.exp(log_precision + brevity)


def speedup(counts: Iterable[tuple[int, int]]) -> float:
    """Total tokens over total iterations for per-sentence (tokens, iterations)."""
    tokens = 0
    iterations = 0
    for tok, it in counts:
        if tok < 1 or it < 1:
            raise ValueError("token and iteration counts must be positive")
        tokens += tok
        iterations += it
    if iterations == 0:
        raise ValueError("speedup is undefined without iterations")
    return tokens / iterations


@dataclass(frozen=True)
class SentenceDecode:
    """Decode outcome for one corpus sentence (the selected candidate)."""

    example: Example
    beam: LengthBeamResult

    @property
    def sequence(self) -> tuple[int, ...]:
        return self.beam.selected.result.sequence

    @property
    def tokens(self) -> int:
        return len(self.sequence)

    @property
    def iterations(self) -> int:
        return self.beam.selected.result.iterations


@dataclass(frozen=True)
class CorpusMetrics:
    bleu: float | None
    total_tokens: int
    total_iterations: int

    @property
    def speedup(self) -> float:
        return self.total_tokens / self.total_iterations


def decode_corpus(
    scorer: Scorer,
    corpus: Sequence[Example],
    config: DecodeConfig,
    *,
    oracle_lengths: bool = False,
    jobs: int = 1,
    record_fills: bool = False,
) -> list[SentenceDecode]:
    """Decode every sentence; with ``oracle_lengths`` the hypothesis length is
    pinned to the reference length and the length beam is ignored."""
    decoder = MaskedDecoder(
        scorer=scorer,
        heuristic=config.heuristic,
        param=config.param,
        length_beam=config.length_beam,
        update_strategy=config.update_strategy,
        max_iterations=config.max_iterations,
        fixed_t_decay=config.fixed_t_decay,
    )

    def one(example: Example) -> SentenceDecode:
        if oracle_lengths:
            if example.ref is None:
                raise ValueError("oracle-length decoding needs references")
            beam = decoder.decode(example.src, n=len(example.ref), record_fills=record_fills)
        else:
            beam = decoder.decode(example.src, record_fills=record_fills)
        return SentenceDecode(example=example, beam=beam)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, corpus))
    return [one(ex) for ex in corpus]


def corpus_metrics(decodes: Sequence[SentenceDecode], smooth: bool = False) -> CorpusMetrics:
    bleu = None
    if decodes and all(d.example.ref is not None for d in decodes):
        bleu = corpus_bleu([d.sequence for d in decodes], [d.example.ref for d in decodes], smooth=smooth)
    return CorpusMetrics(
        bleu=bleu,
        total_tokens=sum(d.tokens for d in decodes),
        total_iterations=sum(d.iterations for d in decodes),
    )


@dataclass(frozen=True)
class IterationCurve:
    """Corpus BLEU of the greedy completions after each iteration index.

    Sentences that finish early contribute their final output to all later
    indices, so the curve is defined up to the corpus-wide maximum
    iteration count.
    """

    heuristic: str
    param: float
    tokens_per_iteration: float
    bleu: tuple[float, ...]


def bleu_over_iterations(
    scorer: Scorer,
    corpus: Sequence[Example],
    config: DecodeConfig,
    *,
    oracle_lengths: bool = False,
    jobs: int = 1,
    smooth: bool = False,
) -> IterationCurve:
    decodes = decode_corpus(
        scorer, corpus, config, oracle_lengths=oracle_lengths, jobs=jobs, record_fills=True
    )
    refs = []
    fills: list[list[tuple[int, ...]]] = []
    for d in decodes:
        if d.example.ref is None:
            raise ValueError("BLEU curves need references")
        refs.append(d.example.ref)
        fills.append([step.filled for step in d.beam.selected.result.trace.steps])
    max_iter = max(len(f) for f in fills)
    values = []
    for t in range(max_iter):
        hyps = [f[min(t, len(f) - 1)] for f in fills]
        values.append(corpus_bleu(hyps, refs, smooth=smooth))
    metrics = corpus_metrics(decodes)
    return IterationCurve(
        heuristic=config.heuristic,
        param=config.param,
        tokens_per_iteration=metrics.speedup,
        bleu=tuple(values),
    )


@dataclass(frozen=True)
class LengthBucketStats:
    lo: int
    hi: int
    count: int
    mean_iterations: float
    std_iterations: float


def iterations_vs_length(
    scorer: Scorer,
    corpus: Sequence[Example],
    config: DecodeConfig,
    *,
    oracle_lengths: bool = True,
    bucket_width: int = 5,
    jobs: int = 1,
) -> list[LengthBucketStats]:
    """Mean and standard deviation of iteration counts per sentence-length
    bucket (widths of ``bucket_width``, starting at length 1)."""
    if oracle_lengths and any(ex.ref is None for ex in corpus):
        raise ValueError("oracle-length analysis needs references")
    decodes = decode_corpus(scorer, corpus, config, oracle_lengths=oracle_lengths, jobs=jobs)
    buckets: dict[int, list[int]] = {}
    for d in decodes:
        buckets.setdefault((d.tokens - 1) // bucket_width, []).append(d.iterations)
    out = []
    for idx in sorted(buckets):
        vals = buckets[idx]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        out.append(
            LengthBucketStats(
                lo=idx * bucket_width + 1,
                hi=(idx + 1) * bucket_width,
                count=len(vals),
                mean_iterations=mean,
                std_iterations=math.sqrt(var),
            )
        )
    return out


@dataclass(frozen=True)
class TauTuning:
    tau: float
    dev_speedup: float
    target: float
    achieved: bool
    rounds: int


def tune_tau(
    scorer: Scorer,
    dev_corpus: Sequence[Example],
    heuristic: str,
    target_speedup: float,
    tolerance: float = 0.25,
    *,
    config: DecodeConfig | None = None,
    max_rounds: int = 20,
    jobs: int = 1,
    oracle_lengths: bool = False,
) -> TauTuning:
    """Bisection over tau for a target dev speedup.

    Speedup is monotone non-increasing in tau, so the search brackets the
    target between tau=0 (fastest) and tau=1 (one token per iteration).
    Unattainable targets return the closest achievable setting with
    ``achieved=False``.
    """
    if target_speedup < 1:
        raise ValueError("target speedup must be >= 1")
    base = config or DecodeConfig(heuristic=heuristic, param=0.5)

    def measure(tau: float) -> float:
        cfg = replace(base, heuristic=heuristic, param=tau)
        decodes = decode_corpus(scorer, dev_corpus, cfg, jobs=jobs, oracle_lengths=oracle_lengths)
        return corpus_metrics(decodes).speedup

    lo, hi = 0.0, 1.0
    fastest = measure(0.0)
    if target_speedup > fastest:
        return TauTuning(
            tau=0.0,
            dev_speedup=fastest,
            target=target_speedup,
            achieved=abs(fastest - target_speedup) <= tolerance,
            rounds=1,
        )
    slowest = measure(1.0)
    best = min(
        ((abs(s - target_speedup), tau, s) for tau, s in ((0.0, fastest), (1.0, slowest))),
    )
    rounds = 2
    while rounds < max_rounds and best[0] > tolerance:
        mid = (lo + hi) / 2
        s = measure(mid)
        rounds += 1
        if abs(s - target_speedup) < best[0]:
            best = (abs(s - target_speedup), mid, s)
        if s > target_speedup:
            lo = mid
        else:
            hi = mid
    return TauTuning(
        tau=best[1],
        dev_speedup=best[2],
        target=target_speedup,
        achieved=best[0] <= tolerance,
        rounds=rounds,
    )
