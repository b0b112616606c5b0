"""Corpus BLEU with clipped n-gram precisions and a brevity penalty."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

MAX_N = 4
# matches_1..4, counts_1..4, hypothesis length, effective reference length
N_STATS = 2 * MAX_N + 2


@dataclass(frozen=True)
class BleuReport:
    precisions: tuple[Fraction, ...]
    brevity_penalty: float
    score: float
    candidate_length: int
    reference_length: int

    @property
    def ratio(self) -> float:
        return self.candidate_length / self.reference_length if self.reference_length else 0.0

    def format(self) -> str:
        ps = "/".join(f"{100 * float(p):.1f}" for p in self.precisions)
        return (
            f"BLEU = {self.score:.2f}, p1/p2/p3/p4 = {ps} (BP={self.brevity_penalty:.3f}, ratio={self.ratio:.3f}, "
            f"hyp_len={self.candidate_length}, ref_len={self.reference_length})"
        )


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def closest_ref_length(hyp_len: int, ref_lens: Sequence[int]) -> int:
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def bleu_sufficient_stats(
    hypothesis: Sequence[str], references: Sequence[Sequence[str]], max_n: int = MAX_N
) -> np.ndarray:
    """Integer vector (matches_n..., counts_n..., hyp_len, ref_len)."""
    if not references:
        raise ValueError("each hypothesis needs at least one reference")
    stats = np.zeros(2 * max_n + 2, dtype=np.int64)
    for n in range(1, max_n + 1):
        hyp = _ngrams(hypothesis, n)
        best_ref: Counter = Counter()
        for ref in references:
            best_ref |= _ngrams(ref, n)
        stats[n - 1] = sum(min(c, best_ref[g]) for g, c in hyp.items())
        stats[max_n + n - 1] = max(len(hypothesis) - n + 1, 0)
    stats[2 * max_n] = len(hypothesis)
    stats[2 * max_n + 1] = closest_ref_length(len(hypothesis), [len(r) for r in references])
    return stats


def brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len > ref_len:
        return 1.0
    if hyp_len == 0:
        return 0.0
    return math.exp(1.0 - ref_len / hyp_len)


def stats_to_bleu(stats: Sequence[int], max_n: int = MAX_N) -> BleuReport:
    stats = [int(v) for v in stats]
    matches, counts = stats[:max_n], stats[max_n:2 * max_n]
    hyp_len, ref_len = stats[2 * max_n], stats[2 * max_n + 1]
    # an order with no candidate n-grams has nothing to get wrong: precision 1
    precisions = tuple(Fraction(m, c) if c else Fraction(1) for m, c in zip(matches, counts))
    bp = brevity_penalty(hyp_len, ref_len)
    if any(p == 0 for p in precisions):
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(precisions, bp, score, hyp_len, ref_len)


def smoothed_bleu(stats: Sequence[float], max_n: int = MAX_N) -> float:
    """BLEU in [0, 100] with add-one on matches and counts for n >= 2."""
    matches, counts = stats[:max_n], stats[max_n:2 * max_n]
    hyp_len, ref_len = stats[2 * max_n], stats[2 * max_n + 1]
    if counts[0] == 0 or matches[0] == 0:
        return 0.0
    logp = math.log(matches[0] / counts[0])
    for n in range(1, max_n):
        logp += math.log((matches[n] + 1) / (counts[n] + 1))
    return 100.0 * brevity_penalty(hyp_len, ref_len) * math.exp(logp / max_n)


def corpus_stats(
    hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[Sequence[str]]], max_n: int = MAX_N
) -> np.ndarray:
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} reference sets")
    if not hypotheses:
        raise ValueError("empty hypothesis set")
    total = np.zeros(2 * max_n + 2, dtype=np.int64)
    for h, refs in zip(hypotheses, references):
        total += bleu_sufficient_stats(h, refs, max_n)
    return total


def bleu(
    hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[Sequence[str]]], max_n: int = MAX_N
) -> BleuReport:
    """Corpus BLEU; ``references[i]`` is the list of references for sentence i."""
    return stats_to_bleu(corpus_stats(hypotheses, references, max_n), max_n)


def evaluate_files(hyp_path, ref_paths: Sequence) -> BleuReport:
    """Corpus BLEU over files, after splitting punctuation off both sides.

    Tokenizing is idempotent on already tokenized text, so both raw and
    tokenized files score the same way.
    """
    from phrasemt.corpus_prep import read_lines, tokenize

    hyps = [tokenize(line) for line in read_lines(hyp_path)]
    ref_sets = [[tokenize(line) for line in read_lines(p)] for p in ref_paths]
    for p, refs in zip(ref_paths, ref_sets):
        if len(refs) != len(hyps):
            raise ValueError(f"{p}: {len(refs)} lines but the hypothesis file has {len(hyps)}")
    return bleu(hyps, [list(rs) for rs in zip(*ref_sets)])
