"""Brute-force reference implementations used as test oracles.

Each oracle recomputes a quantity from first principles without sharing
code paths with the package: enumeration instead of dynamic programming,
explicit counting instead of cached tables.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter

NULL = "NULL"


# -- language model --------------------------------------------------------


def mle_trigram_logprob(corpus, sentence, order=3):
    """log P(sentence) as the product of Count(h, w) / Count(h) factors."""
    grams = Counter()
    hists = Counter()
    for sent in corpus:
        seq = ["*"] * (order - 1) + list(sent) + ["STOP"]
        for i in range(order - 1, len(seq)):
            grams[tuple(seq[i - order + 1:i + 1])] += 1
            hists[tuple(seq[i - order + 1:i])] += 1
    seq = ["*"] * (order - 1) + list(sentence) + ["STOP"]
    total = 0.0
    for i in range(order - 1, len(seq)):
        g = tuple(seq[i - order + 1:i + 1])
        if grams[g] == 0:
            return -math.inf
        total += math.log(grams[g] / hists[g[:-1]])
    return total


# -- alignment ---------------------------------------------------------------


def model1_expected_counts(cond, gen, t):
    """Expected (cond_word, gen_word) link counts by enumerating every alignment.

    ``t[(c, g)]`` is t(g | c); NULL is conditioning position 0.
    """
    positions = [NULL] + list(cond)
    counts = Counter()
    z = 0.0
    for a in itertools.product(range(len(positions)), repeat=len(gen)):
        p = 1.0
        for j, i in enumerate(a):
            p *= t[(positions[i], gen[j])]
        z += p
        for j, i in enumerate(a):
            counts[(positions[i], gen[j])] += p
    return {k: v / z for k, v in counts.items()}, z


def model1_em(pairs, iterations):
    """Textbook Model 1 EM over dictionaries, uniform start on co-occurring pairs."""
    cooc = {}
    for cond, gen in pairs:
        for c in [NULL] + list(cond):
            cooc.setdefault(c, set()).update(gen)
    t = {(c, g): 1.0 / len(gs) for c, gs in cooc.items() for g in gs}
    for _ in range(iterations):
        counts = Counter()
        for cond, gen in pairs:
            cs = [NULL] + list(cond)
            for g in gen:
                z = sum(t[(c, g)] for c in cs)
                for c in cs:
                    counts[(c, g)] += t[(c, g)] / z
        totals = Counter()
        for (c, g), v in counts.items():
            totals[c] += v
        t = {(c, g): v / totals[c] for (c, g), v in counts.items()}
    return t


# -- phrase extraction --------------------------------------------------------


def consistent_rectangles(src_len, tgt_len, links, max_len):
    """Every (src_span, tgt_span) box that is consistent with the links."""
    out = set()
    for s0 in range(src_len):
        for s1 in range(s0, min(src_len, s0 + max_len)):
            for t0 in range(tgt_len):
                for t1 in range(t0, min(tgt_len, t0 + max_len)):
                    inside = False
                    ok = True
                    for i, j in links:
                        in_s = s0 <= i <= s1
                        in_t = t0 <= j <= t1
                        if in_s != in_t:
                            ok = False
                            break
                        inside = inside or (in_s and in_t)
                    if ok and inside:
                        out.add(((s0, s1), (t0, t1)))
    return out


# -- decoding ------------------------------------------------------------------


def _orient(prev, cur):
    if cur[0] == prev[1] + 1:
        return 0
    if cur[1] == prev[0] - 1:
        return 1
    return 2


def _segmentations(n):
    if n == 0:
        yield []
        return
    for first in range(1, n + 1):
        for rest in _segmentations(n - first):
            yield [(0, first - 1)] + [(a + first, b + first) for a, b in rest]


def exhaustive_decode(model, src):
    """Best (score, target) over all segmentations x orders x options.

    Unknown single words get the copy option with the OOV penalty, as the
    decoder does.  Each complete derivation is scored from scratch: the LM
    over the whole target string, and every other feature summed per phrase.
    """
    n = len(src)
    w = [float(x) for x in model.weights]
    oov = model.setting("oov_penalty", float)
    table = {}
    for i in range(n):
        for j in range(i, n):
            phrase = tuple(src[i:j + 1])
            for tgt, scores in model.phrase_table.lookup(phrase):
                logs = [math.log(p) for p in scores]
                table.setdefault((i, j), []).append((tuple(tgt), logs, model.reordering.get(phrase, tuple(tgt))))
        if (i, i) not in table:
            word = (src[i],)
            table[(i, i)] = [(word, [oov] * 4, model.reordering.get(word, word))]

    lm_memo = {}

    def lm_score(target):
        v = lm_memo.get(target)
        if v is None:
            v = lm_memo[target] = model.lm.sentence_logprob(list(target))
        return v

    best = (-math.inf, ())
    for seg in _segmentations(n):
        if any(span not in table for span in seg):
            continue
        for order in itertools.permutations(seg):
            for choice in itertools.product(*(table[s] for s in order)):
                score = 0.0
                target = ()
                for k, (span, (tgt, logs, reo)) in enumerate(zip(order, choice)):
                    prev = order[k - 1] if k > 0 else (-1, -1)
                    nxt = order[k + 1] if k + 1 < len(order) else (n, n)
                    score += sum(wi * li for wi, li in zip(w[1:5], logs))
                    score += w[5] + w[6] * len(tgt)
                    score += w[7] * abs(span[0] - prev[1] - 1)
                    ob = _orient(prev, span)
                    of = _orient(span, nxt)
                    score += w[11 + ob] * math.log(reo[3 + ob]) + w[8 + of] * math.log(reo[of])
                    target += tgt
                score += w[0] * lm_score(target)
                if score > best[0] + 1e-12 or (abs(score - best[0]) <= 1e-12 and target < best[1]):
                    best = (score, target)
    return best


# -- BLEU -----------------------------------------------------------------------


def ngram_bleu(hyps, refs_list, max_n=4):
    """Corpus BLEU computed with plain loops; returns (score, precisions, bp)."""
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, refs in zip(hyps, refs_list):
        hyp_len += len(hyp)
        ref_len += sorted((abs(len(r) - len(hyp)), len(r)) for r in refs)[0][1]
        for n in range(1, max_n + 1):
            hgrams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
            totals[n - 1] += len(hgrams)
            for g in set(hgrams):
                ref_max = max(sum(1 for i in range(len(r) - n + 1) if tuple(r[i:i + n]) == g) for r in refs)
                matches[n - 1] += min(hgrams.count(g), ref_max)
    precisions = [m / t if t else 1.0 for m, t in zip(matches, totals)]
    bp = 1.0 if hyp_len > ref_len else (math.exp(1 - ref_len / hyp_len) if hyp_len else 0.0)
    if min(precisions) == 0:
        return 0.0, precisions, bp
    return 100 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n), precisions, bp
