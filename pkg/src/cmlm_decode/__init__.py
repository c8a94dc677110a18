"""Semi-autoregressive masked decoding with pluggable conditional scorers.

The engine iteratively unmasks positions of a fixed-length hypothesis,
trading decode iterations against output quality through a choice of
unmasking heuristics, and exposes estimator-style front ends that compose
with the scikit-learn ecosystem.
"""

from .engine import (
    DecodeResult,
    LengthBeamResult,
    MaskedDecoder,
    apply_update_strategy,
    decode,
    decode_with_length_beam,
)
from .factorization import (
    BestFactorization,
    FactorizationScore,
    SearchBudgetExceeded,
    best_factorization,
    best_output_search,
    trace_log_prob,
)
from .heuristics import (
    select_comb_thresh,
    select_fcomb_thresh,
    select_fixed_k,
    select_fixed_t,
    select_thresh,
)
from .metrics import (
    CorpusMetrics,
    IterationCurve,
    bleu_over_iterations,
    corpus_bleu,
    corpus_metrics,
    decode_corpus,
    iterations_vs_length,
    speedup,
    tune_tau,
)
from .scorers import (
    CountScorer,
    ExternalScorer,
    PlantedMarkovScorer,
    Scorer,
    TrainingConfig,
    train_count_cmlm,
)
from .types import (
    MASK,
    DecodeConfig,
    DecodeStep,
    DecodeTrace,
    Example,
    HypothesisState,
    PositionPrediction,
    ProgressViolation,
    SubsetViolation,
    Vocab,
    apply_unmask,
    build_trace,
    new_hypothesis,
)

__version__ = "0.1.0"

__all__ = [
    "BestFactorization",
    "CorpusMetrics",
    "CountScorer",
    "DecodeConfig",
    "DecodeResult",
    "DecodeStep",
    "DecodeTrace",
    "Example",
    "ExternalScorer",
    "FactorizationScore",
    "HypothesisState",
    "IterationCurve",
    "LengthBeamResult",
    "MASK",
    "MaskedDecoder",
    "PlantedMarkovScorer",
    "PositionPrediction",
    "ProgressViolation",
    "Scorer",
    "SearchBudgetExceeded",
    "SubsetViolation",
    "TrainingConfig",
    "Vocab",
    "apply_unmask",
    "apply_update_strategy",
    "best_factorization",
    "best_output_search",
    "bleu_over_iterations",
    "build_trace",
    "corpus_bleu",
    "corpus_metrics",
    "decode",
    "decode_corpus",
    "decode_with_length_beam",
    "iterations_vs_length",
    "new_hypothesis",
    "select_comb_thresh",
    "select_fcomb_thresh",
    "select_fixed_k",
    "select_fixed_t",
    "select_thresh",
    "speedup",
    "train_count_cmlm",
    "trace_log_prob",
    "tune_tau",
]
