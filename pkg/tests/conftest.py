from __future__ import annotations

import shutil
import subprocess
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cmlm_decode import HypothesisState, MASK
from cmlm_decode.scorers import PlantedMarkovScorer, Scorer
from cmlm_decode.scorers.base import top_lengths, triangular_length_probs

EXAMPLE_SCORER_DIR = Path(__file__).resolve().parent.parent / "example-scorer"


@pytest.fixture(scope="session")
def example_scorer_main() -> Path:
    """Path to the built example scorer, compiling it if necessary."""
    if shutil.which("node") is None:
        pytest.skip("node is not available")
    main = EXAMPLE_SCORER_DIR / "dist" / "src" / "main.js"
    if not main.exists():
        local_tsc = EXAMPLE_SCORER_DIR / "node_modules" / ".bin" / "tsc"
        compiler = str(local_tsc) if local_tsc.exists() else shutil.which("tsc")
        if compiler is None:
            pytest.skip("no TypeScript compiler available to build the example scorer")
        subprocess.run([compiler, "-p", str(EXAMPLE_SCORER_DIR)], check=True)
    return main


class StubScorer(Scorer):
    """Serves scripted distributions; ``table`` maps position -> vector, or a
    callable of the state for per-iteration scripting."""

    def __init__(self, table, lengths=None, vocab_size=None):
        self.table = table
        self.lengths = lengths
        self.vocab_size = vocab_size

    def distributions(self, src, state: HypothesisState, *, all_positions=False):
        table = self.table(state) if callable(self.table) else self.table
        out = {}
        for i, tok in enumerate(state.tokens):
            if tok == MASK or all_positions:
                out[i] = np.asarray(table[i], dtype=float)
        return out

    def predict_lengths(self, src: Sequence[int], beam: int):
        if self.lengths is not None:
            return top_lengths(dict(self.lengths), beam)
        return top_lengths(triangular_length_probs(len(src)), beam)


def uniform_stub(n: int, vocab: int) -> StubScorer:
    return StubScorer({i: np.full(vocab, 1.0 / vocab) for i in range(n)})


@pytest.fixture
def planted() -> PlantedMarkovScorer:
    return PlantedMarkovScorer(source_vocab_size=6, target_vocab_size=3, seed=11)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
