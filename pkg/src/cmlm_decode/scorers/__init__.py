from .base import Scorer, stable_hash, top_lengths, triangular_length_probs
from .count import BOUNDARY, CountScorer, TrainingConfig, train_count_cmlm
from .external import DesyncError, ExternalScorer, ProtocolError, ScorerTimeout
from .planted import PlantedMarkovScorer, constrained_marginals

__all__ = [
    "BOUNDARY",
    "CountScorer",
    "DesyncError",
    "ExternalScorer",
    "PlantedMarkovScorer",
    "ProtocolError",
    "Scorer",
    "ScorerTimeout",
    "TrainingConfig",
    "constrained_marginals",
    "stable_hash",
    "top_lengths",
    "train_count_cmlm",
    "triangular_length_probs",
]
