"""Independent brute-force oracles the tests check the library against.

Everything here is deliberately written by a different route than the
library code: posteriors by complete enumeration, BLEU by explicit n-gram
scanning, factorization search by literal chain enumeration.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

MASK = -1


def chain_prob(pi, trans, seq) -> float:
    """Joint probability of a full chain under explicit parameters."""
    p = pi[seq[0]]
    for a, b in zip(seq, seq[1:]):
        p *= trans[a][b]
    return float(p)


def enumerate_posteriors(pi, trans, tokens) -> dict[int, np.ndarray]:
    """Posterior marginals at masked slots by summing over all completions."""
    pi = np.asarray(pi, dtype=float)
    trans = np.asarray(trans, dtype=float)
    v = pi.shape[0]
    masked = [i for i, t in enumerate(tokens) if t == MASK]
    acc = {i: np.zeros(v) for i in masked}
    z = 0.0
    for combo in itertools.product(range(v), repeat=len(masked)):
        seq = list(tokens)
        for pos, val in zip(masked, combo):
            seq[pos] = val
        p = chain_prob(pi, trans, seq)
        z += p
        for pos, val in zip(masked, combo):
            acc[pos][val] += p
    return {pos: vec / z for pos, vec in acc.items()}


def bleu(hypotheses, references, max_order=4, smooth=False) -> float:
    """Reference BLEU: explicit clipped counting, geometric mean, brevity penalty."""
    assert len(hypotheses) == len(references) and hypotheses
    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    log_sum = 0.0
    for order in range(1, max_order + 1):
        match = 0
        total = 0
        for hyp, ref in zip(hypotheses, references):
            hyp = list(hyp)
            ref = list(ref)
            grams = [tuple(hyp[i : i + order]) for i in range(len(hyp) - order + 1)]
            total += len(grams)
            for gram in sorted(set(grams)):
                in_hyp = sum(1 for g in grams if g == gram)
                in_ref = 0
                for i in range(len(ref) - order + 1):
                    if tuple(ref[i : i + order]) == gram:
                        in_ref += 1
                match += min(in_hyp, in_ref)
        if smooth:
            match, total = match + 1, total + 1
        if match == 0 or total == 0:
            return 0.0
        log_sum += math.log(match / total)
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_sum / max_order)


def canonical_chains(positions, max_steps=None):
    """All strictly shrinking mask chains as block tuples, in the canonical
    depth-first order over lexicographic subsets."""
    positions = tuple(sorted(positions))
    if not positions:
        yield ()
        return
    if max_steps == 0:
        return
    remaining = None if max_steps is None else max_steps - 1
    for block in nonempty_subsets(positions):
        rest = tuple(p for p in positions if p not in block)
        for tail in canonical_chains(rest, remaining):
            yield (block,) + tail


def nonempty_subsets(items):
    items = tuple(sorted(items))
    out = []

    def rec(prefix, start):
        for j in range(start, len(items)):
            cur = prefix + (items[j],)
            out.append(cur)
            rec(cur, j + 1)

    rec((), 0)
    return out


def chain_score_by_enumeration(pi, trans, reference, blocks) -> float:
    """Log probability of a masking chain, conditionals via enumeration."""
    tokens = [MASK] * len(reference)
    total = 0.0
    for block in blocks:
        post = enumerate_posteriors(pi, trans, tokens)
        for i in block:
            total += math.log(post[i][reference[i]])
        for i in block:
            tokens[i] = reference[i]
    return total


def best_chain_by_enumeration(pi, trans, reference, max_steps=None):
    """Argmax chain by literal enumeration; first chain wins ties."""
    best_score = -math.inf
    best_blocks = None
    for blocks in canonical_chains(range(len(reference)), max_steps):
        score = chain_score_by_enumeration(pi, trans, reference, blocks)
        if score > best_score:
            best_score = score
            best_blocks = blocks
    return best_blocks, best_score
