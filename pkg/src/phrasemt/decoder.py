"""Stack-based beam search over phrase segmentations and orderings.

Hypotheses are grouped by the number of covered source words.  Two
hypotheses recombine when every future feature contribution is identical
for both: same coverage, LM context, last source span and last phrase pair
(the pair decides its own forward-orientation score).  The losers are kept
as arcs on the winner so n-best lists can be read off the lattice.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from phrasemt.language_model import START, STOP
from phrasemt.model import (
    BWD,
    DISTORTION,
    FWD,
    LM,
    N_FEATURES,
    PHRASE_PENALTY,
    WORD_PENALTY,
    TranslationModel,
)
from phrasemt.reordering import orientation_of

UNLIMITED = -1


class DecodingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Option:
    """One translation of one source span."""

    start: int
    end: int
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    base: np.ndarray  # features that depend only on the pair
    base_score: float
    fwd: tuple[float, float, float]  # log p(orientation) w.r.t. the next phrase
    bwd: tuple[float, float, float]
    estimate: float  # weighted context-free score for future costs


class Hypothesis:
    __slots__ = (
        "coverage", "n_covered", "lm_ctx", "last_span", "opt", "prev", "score", "future",
        "target", "lm_delta", "dist", "bwd_o", "prev_fwd_o", "end_fwd_o", "arcs",
    )

    def __init__(self, coverage, n_covered, lm_ctx, last_span, opt, prev, score, future, target,
                 lm_delta=0.0, dist=0, bwd_o=None, prev_fwd_o=None, end_fwd_o=None):
        self.coverage = coverage
        self.n_covered = n_covered
        self.lm_ctx = lm_ctx
        self.last_span = last_span
        self.opt = opt
        self.prev = prev
        self.score = score
        self.future = future
        self.target = target
        self.lm_delta = lm_delta
        self.dist = dist
        self.bwd_o = bwd_o
        self.prev_fwd_o = prev_fwd_o
        self.end_fwd_o = end_fwd_o
        self.arcs: list[Hypothesis] = []

    @property
    def state(self):
        pair = (self.opt.src, self.opt.tgt) if self.opt is not None else None
        return (self.coverage, self.lm_ctx, self.last_span, pair)

    def delta(self) -> np.ndarray:
        """Features added by the step that produced this hypothesis."""
        v = self.opt.base.copy()
        v[LM] = self.lm_delta
        v[DISTORTION] = self.dist
        v[BWD + self.bwd_o] += self.opt.bwd[self.bwd_o]
        if self.prev_fwd_o is not None:
            o, lp = self.prev_fwd_o
            v[FWD + o] += lp
        if self.end_fwd_o is not None:
            v[FWD + self.end_fwd_o] += self.opt.fwd[self.end_fwd_o]
        return v

    def chain(self) -> list["Hypothesis"]:
        out = []
        h = self
        while h.opt is not None:
            out.append(h)
            h = h.prev
        return out[::-1]

    def features(self) -> np.ndarray:
        total = np.zeros(N_FEATURES)
        for h in self.chain():
            total += h.delta()
        return total


@dataclass
class NBestEntry:
    tokens: tuple[str, ...]
    score: float
    features: np.ndarray
    phrases: tuple[Option, ...] = ()


@dataclass
class DecodeResult:
    best: list[str]
    nbest: list[NBestEntry]


# -- options and future costs ----------------------------------------------


def collect_options(model: TranslationModel, src: Sequence[str], ttable_limit: int | None = None):
    """options[(i, j)] for every source span with at least one translation."""
    w = model.weights
    lm = model.lm
    if ttable_limit is None:
        ttable_limit = model.setting("ttable_limit")
    oov_penalty = model.setting("oov_penalty", float)
    max_len = max(getattr(model.phrase_table, "max_src_len", 0), 1)
    n = len(src)
    options: dict[tuple[int, int], list[Option]] = {}
    lm_w = w[LM]

    def make(i, j, tgt, tm_scores, reo):
        base = np.zeros(N_FEATURES)
        base[1:5] = tm_scores
        base[PHRASE_PENALTY] = 1.0
        base[WORD_PENALTY] = len(tgt)
        est = sum(lm.logprob(t, tgt[:k]) for k, t in enumerate(tgt))
        base_score = float(base @ w)
        return Option(i, j, tuple(src[i:j + 1]), tgt, base, base_score,
                      tuple(math.log(p) for p in reo[:3]), tuple(math.log(p) for p in reo[3:]),
                      base_score + lm_w * est)

    for i in range(n):
        for j in range(i, min(n, i + max_len)):
            phrase = tuple(src[i:j + 1])
            entries = model.phrase_table.lookup(phrase)
            if not entries:
                continue
            opts = [
                make(i, j, tgt, [math.log(max(p, 1e-300)) for p in scores],
                     model.reordering.get(phrase, tgt))
                for tgt, scores in entries
            ]
            opts.sort(key=lambda o: (-o.base_score, o.tgt))
            if ttable_limit and ttable_limit > 0:
                opts = opts[:ttable_limit]
            options[(i, j)] = opts
        if (i, i) not in options:
            # copy an unknown word through with a fixed penalty on each translation score
            tgt = (src[i],)
            options[(i, i)] = [make(i, i, tgt, [oov_penalty] * 4, model.reordering.get(tgt, tgt))]
    return options


def compute_future_cost(model: TranslationModel, src: Sequence[str], options=None) -> list[list[float]]:
    """cost[i][j]: best weighted context-free score for covering span i..j."""
    if options is None:
        options = collect_options(model, src)
    n = len(src)
    cost = [[-math.inf] * n for _ in range(n)]
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length - 1
            best = max((o.estimate for o in options.get((i, j), ())), default=-math.inf)
            for k in range(i, j):
                split = cost[i][k] + cost[k + 1][j]
                if split > best:
                    best = split
            cost[i][j] = best
    return cost


def _uncovered_cost(coverage: int, n: int, cost) -> float:
    total = 0.0
    i = 0
    while i < n:
        if coverage >> i & 1:
            i += 1
            continue
        j = i
        while j + 1 < n and not coverage >> (j + 1) & 1:
            j += 1
        total += cost[i][j]
        i = j + 1
    return total


# -- search -----------------------------------------------------------------


def _sort_key(h: Hypothesis):
    return (-(h.score + h.future), h.target)


def translate(
    model: TranslationModel,
    src: Sequence[str],
    stack_size: int | None = None,
    distortion_limit: int | None = None,
    nbest_size: int = 1,
    recombine: bool = True,
    ttable_limit: int | None = None,
) -> DecodeResult:
    """Decode one tokenized sentence; ``distortion_limit < 0`` means unlimited."""
    if model is None or model.phrase_table is None or len(model.phrase_table) == 0:
        raise DecodingError("cannot decode with an empty model")
    if stack_size is None:
        stack_size = model.setting("stack_size")
    if distortion_limit is None:
        distortion_limit = model.setting("distortion_limit")
    src = list(src)
    n = len(src)
    w = model.weights
    lm = model.lm
    order = lm.order
    options = collect_options(model, src, ttable_limit)
    cost = compute_future_cost(model, src, options)
    full = (1 << n) - 1

    by_start: dict[int, list[tuple[int, list[Option]]]] = {i: [] for i in range(n)}
    for (i, j), opts in sorted(options.items()):
        by_start[i].append((j, opts))

    lm_cache: dict[tuple, tuple[float, tuple]] = {}

    def lm_step(ctx, words):
        key = (ctx, words)
        hit = lm_cache.get(key)
        if hit is None:
            total = 0.0
            c = ctx
            for t in words:
                total += lm.logprob(t, c)
                c = (c + (t,))[1:] if order > 1 else ()
            hit = (total, c)
            lm_cache[key] = hit
        return hit

    w_lm = w[LM]
    w_dist = w[DISTORTION]
    init_ctx = (START,) * (order - 1)
    root = Hypothesis(0, 0, init_ctx, (-1, -1), None, None, 0.0, cost[0][n - 1] if n else 0.0, ())

    if n == 0:
        stop = lm.logprob(STOP, init_ctx)
        feats = np.zeros(N_FEATURES)
        feats[LM] = stop
        return DecodeResult([], [NBestEntry((), float(feats @ w), feats)])

    stacks: list[dict] = [dict() for _ in range(n + 1)]
    stacks[0][root.state] = root

    def add(stack, hyp):
        key = hyp.state
        old = stack.get(key)
        if old is None:
            stack[key] = hyp
            return
        if not recombine:
            # keep distinct entries while still deduplicating exact states
            stack[(key, id(hyp))] = hyp
            return
        if hyp.score > old.score or (hyp.score == old.score and hyp.target < old.target):
            hyp.arcs = old.arcs + [old]
            old.arcs = []
            stack[key] = hyp
        else:
            old.arcs.append(hyp)

    for k in range(n):
        if not stacks[k]:
            continue
        hyps = sorted(stacks[k].values(), key=_sort_key)[:stack_size]
        for h in hyps:
            last_start, last_end = h.last_span
            for i in range(n):
                if h.coverage >> i & 1:
                    continue
                dist = abs(i - last_end - 1)
                if 0 <= distortion_limit < dist:
                    continue
                for j, opts in by_start[i]:
                    span_mask = ((1 << (j + 1)) - 1) ^ ((1 << i) - 1)
                    if h.coverage & span_mask:
                        break
                    cov = h.coverage | span_mask
                    if distortion_limit >= 0 and cov != full:
                        first_gap = _first_gap(cov)
                        if first_gap < i and j + 1 - first_gap > distortion_limit:
                            continue
                    complete = cov == full
                    bwd_o = orientation_of(h.last_span, (i, j))
                    future = 0.0 if complete else _uncovered_cost(cov, n, cost)
                    for opt in opts:
                        lm_delta, ctx = lm_step(h.lm_ctx, opt.tgt)
                        if complete:
                            lm_delta += lm.logprob(STOP, ctx)
                        if lm_delta == -math.inf:
                            continue
                        score = h.score + opt.base_score + w_lm * lm_delta + w_dist * dist
                        score += w[BWD + bwd_o] * opt.bwd[bwd_o]
                        prev_fwd = None
                        if h.opt is not None:
                            lp = h.opt.fwd[bwd_o]
                            prev_fwd = (int(bwd_o), lp)
                            score += w[FWD + bwd_o] * lp
                        end_o = None
                        if complete:
                            end_o = int(orientation_of((i, j), (n, n)))
                            score += w[FWD + end_o] * opt.fwd[end_o]
                        new = Hypothesis(
                            cov, k + j - i + 1, ctx, (i, j), opt, h, score, future,
                            h.target + opt.tgt, lm_delta, dist, int(bwd_o), prev_fwd, end_o,
                        )
                        add(stacks[new.n_covered], new)

    finals = list(stacks[n].values())
    if not finals:
        if distortion_limit != 0:
            return translate(model, src, stack_size, 0, nbest_size, recombine, ttable_limit)
        raise DecodingError("search produced no complete hypothesis")
    finals.sort(key=lambda h: (-h.score, h.target))
    nbest = extract_nbest(finals, w, max(nbest_size, 1))
    return DecodeResult(list(nbest[0].tokens), nbest)


def _first_gap(coverage: int) -> int:
    return (~coverage & (coverage + 1)).bit_length() - 1


# -- n-best extraction ------------------------------------------------------


def extract_nbest(finals: Sequence[Hypothesis], weights: np.ndarray, size: int, max_paths: int | None = None):
    """Up to ``size`` distinct target strings in descending score order.

    A path is the node list from a final hypothesis back to the root, where
    any node may be replaced by one of the arcs recombined into it.  Paths
    are generated lazily by deviating at positions past the parent's last
    deviation, so every derivation is produced exactly once.
    """
    if max_paths is None:
        max_paths = 50 * size + 1000
    heap = []
    counter = 0
    for h in finals:
        nodes = h.chain()[::-1]
        deltas = [x.delta() for x in nodes]
        feats = np.sum(deltas, axis=0) if deltas else np.zeros(N_FEATURES)
        heapq.heappush(heap, (-float(feats @ weights), _path_target(nodes), counter, nodes, deltas, 0))
        counter += 1

    seen = set()
    out: list[NBestEntry] = []
    popped = 0
    while heap and len(out) < size and popped < max_paths:
        neg, target, _, nodes, deltas, dev = heapq.heappop(heap)
        popped += 1
        if target not in seen:
            seen.add(target)
            feats = np.sum(deltas, axis=0) if deltas else np.zeros(N_FEATURES)
            phrases = tuple(x.opt for x in reversed(nodes))
            out.append(NBestEntry(target, float(feats @ weights), feats, phrases))
        for pos in range(dev, len(nodes)):
            for arc in nodes[pos].arcs:
                tail = arc.chain()[::-1]
                new_nodes = nodes[:pos] + tail
                new_deltas = deltas[:pos] + [x.delta() for x in tail]
                feats = np.sum(new_deltas, axis=0)
                heapq.heappush(
                    heap,
                    (-float(feats @ weights), _path_target(new_nodes), counter, new_nodes, new_deltas, pos + 1),
                )
                counter += 1
    return out


def _path_target(nodes: Sequence[Hypothesis]) -> tuple[str, ...]:
    out: tuple[str, ...] = ()
    for x in reversed(nodes):
        out += x.opt.tgt
    return out
