"""File formats: TSV corpora, JSONL decode traces, metrics CSV.

Corpus lines are ``src-tokens \\t tgt-tokens`` with space-separated integer
token ids; the reference column may be absent for decode-only inputs.
Traces are one JSON object per decode. Metrics CSV columns are fixed so
downstream plotting stays stable.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import LengthBeamResult
from .types import Example

METRIC_COLUMNS = (
    "heuristic",
    "param",
    "length_beam",
    "update_strategy",
    "speedup",
    "bleu",
    "total_tokens",
    "total_iterations",
)


def parse_tokens(text: str, what: str, lineno: int) -> tuple[int, ...]:
    try:
        tokens = tuple(int(t) for t in text.split())
    except ValueError:
        raise ValueError(f"line {lineno}: {what} contains a non-integer token") from None
    if any(t < 0 for t in tokens):
        raise ValueError(f"line {lineno}: {what} contains a negative token id")
    return tokens


def read_corpus(path: str | Path, *, require_refs: bool = False) -> list[Example]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            src_text, _, ref_text = line.partition("\t")
            src = parse_tokens(src_text, "source", lineno)
            if not src:
                raise ValueError(f"line {lineno}: empty source sequence")
            ref = parse_tokens(ref_text, "reference", lineno) if ref_text.strip() else None
            if require_refs and ref is None:
                raise ValueError(f"line {lineno}: reference required but missing")
            examples.append(Example(src=src, ref=ref))
    if not examples:
        raise ValueError(f"corpus {path} is empty")
    return examples


def write_corpus(path: str | Path, examples: Iterable[Example]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            src = " ".join(map(str, ex.src))
            if ex.ref is None:
                fh.write(f"{src}\n")
            else:
                fh.write(f"{src}\t{' '.join(map(str, ex.ref))}\n")


def sample_corpus(
    model,
    seed: int,
    size: int,
    length_range: tuple[int, int],
    sources: tuple[tuple[int, ...], ...] | None = None,
) -> list[Example]:
    """Draw (source, target) pairs from a planted model.

    With ``sources`` the inputs are drawn from that fixed pool instead of
    being sampled fresh.
    """
    if size < 1:
        raise ValueError("corpus size must be >= 1")
    rng = np.random.default_rng([seed, 5])
    out = []
    for _ in range(size):
        if sources is not None:
            src = sources[int(rng.integers(len(sources)))]
        else:
            src = model.sample_source(rng, length_range)
        out.append(Example(src=src, ref=model.sample_target(src, rng)))
    return out


def trace_record(src: Sequence[int], beam: LengthBeamResult) -> dict:
    """JSON-ready record of the selected candidate's trace."""
    selected = beam.selected
    trace = selected.result.trace
    steps = []
    for step in trace.steps:
        entry: dict = {"unmask": [[p.position, p.token, p.prob] for p in step.unmasked]}
        if step.remasked:
            entry["remask"] = list(step.remasked)
        if step.revised:
            entry["revise"] = [[p.position, p.token, p.prob] for p in step.revised]
        steps.append(entry)
    record = {
        "src": list(src),
        "n": trace.n,
        "steps": steps,
        "final": list(selected.result.sequence),
        "norm_score": selected.norm_score,
        "heuristic": trace.heuristic,
        "param": trace.param,
        "update_strategy": trace.update_strategy,
    }
    if trace.cap_forced:
        record["cap_forced"] = True
    return record


def write_traces(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_traces(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                raise ValueError(f"line {lineno}: malformed trace record") from None
    return records


def write_metrics(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in METRIC_COLUMNS})


def read_metrics(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
