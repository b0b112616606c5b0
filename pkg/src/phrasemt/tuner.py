"""Minimum error rate training over accumulated n-best pools.

Every candidate's model score is linear in the step size along a search
direction, so each sentence's 1-best choice changes only at the breakpoints
of the upper envelope of its candidate lines.  Sweeping the merged
breakpoints while adding and removing BLEU sufficient statistics gives the
exact BLEU on every interval of the line.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from phrasemt.decoder import translate
from phrasemt.evaluator import bleu_sufficient_stats, smoothed_bleu, stats_to_bleu
from phrasemt.model import LM, N_FEATURES, TranslationModel

log = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 10
DEFAULT_NBEST = 100
DEFAULT_RESTARTS = 8
DEFAULT_SEED = 42
MAX_PASSES = 50
_IMPROVEMENT = 1e-10


@dataclass
class Candidate:
    tokens: tuple[str, ...]
    features: np.ndarray
    stats: np.ndarray


@dataclass
class TuningPool:
    references: list[list[tuple[str, ...]]]
    candidates: list[list[Candidate]] = field(default_factory=list)
    _seen: list[set] = field(default_factory=list)

    def __post_init__(self):
        if not self.candidates:
            self.candidates = [[] for _ in self.references]
            self._seen = [set() for _ in self.references]

    def add(self, sentence: int, tokens: Sequence[str], features) -> bool:
        """Add a candidate unless its target string is already pooled."""
        tokens = tuple(tokens)
        if tokens in self._seen[sentence]:
            return False
        features = np.asarray(features, dtype=float)
        if features.shape != (N_FEATURES,):
            raise ValueError(f"candidate has {features.shape} features, expected {N_FEATURES}")
        self._seen[sentence].add(tokens)
        stats = bleu_sufficient_stats(tokens, self.references[sentence])
        self.candidates[sentence].append(Candidate(tokens, features, stats))
        return True

    def size(self) -> int:
        return sum(len(c) for c in self.candidates)


def select(pool: TuningPool, weights) -> list[int]:
    """Index of each sentence's best candidate; exact ties go to the smaller string."""
    picks = []
    for cands in pool.candidates:
        scores = [float(c.features @ weights) for c in cands]
        best = min(range(len(cands)), key=lambda k: (-scores[k], cands[k].tokens))
        picks.append(best)
    return picks


def pool_stats(pool: TuningPool, weights) -> np.ndarray:
    picks = select(pool, weights)
    return np.sum([pool.candidates[s][k].stats for s, k in enumerate(picks)], axis=0)


def pool_bleu(pool: TuningPool, weights) -> float:
    return smoothed_bleu(pool_stats(pool, weights))


# -- exact line search ------------------------------------------------------


def upper_envelope(slopes: np.ndarray, intercepts: np.ndarray, order_keys: Sequence) -> list[tuple[float, int]]:
    """Winning line per interval as (interval start, line index), left to right.

    The first interval starts at -inf.  Parallel lines keep the higher
    intercept, then the smaller ``order_keys`` entry.
    """
    idx = sorted(range(len(slopes)), key=lambda k: (slopes[k], -intercepts[k], order_keys[k]))
    lines = []
    for k in idx:
        if lines and slopes[lines[-1]] == slopes[k]:
            continue
        lines.append(k)
    env: list[tuple[float, int]] = []
    for k in lines:
        while env:
            start, top = env[-1]
            x = (intercepts[top] - intercepts[k]) / (slopes[k] - slopes[top])
            if x <= start:
                env.pop()
            else:
                env.append((x, k))
                break
        if not env:
            env.append((-math.inf, k))
    return env


def line_search(pool: TuningPool, weights: np.ndarray, direction: np.ndarray) -> tuple[float, float]:
    """Best (step, smoothed pool BLEU) along ``weights + step * direction``.

    The step is the midpoint of the best interval; unbounded end intervals
    use one unit past their finite boundary.  Ties go to the smaller |step|.
    """
    base = np.zeros(len(pool.candidates[0][0].stats), dtype=np.int64)
    events: list[tuple[float, np.ndarray]] = []
    for cands in pool.candidates:
        feats = np.array([c.features for c in cands])
        slopes = feats @ direction
        intercepts = feats @ weights
        env = upper_envelope(slopes, intercepts, [c.tokens for c in cands])
        base = base + cands[env[0][1]].stats
        for (x, k), (_, prev) in zip(env[1:], env[:-1]):
            events.append((x, cands[k].stats - cands[prev].stats))
    if not events:
        return 0.0, smoothed_bleu(base)

    events.sort(key=lambda e: e[0])
    xs = []
    deltas = []
    for x, d in events:
        if xs and xs[-1] == x:
            deltas[-1] = deltas[-1] + d
        else:
            xs.append(x)
            deltas.append(d)

    candidates = []
    stats = base.copy()
    candidates.append((xs[0] - 1.0, smoothed_bleu(stats)))
    for k, x in enumerate(xs):
        stats = stats + deltas[k]
        right = xs[k + 1] if k + 1 < len(xs) else x + 2.0
        candidates.append(((x + right) / 2.0, smoothed_bleu(stats)))
    best_step, best_bleu = max(candidates, key=lambda c: (c[1], -abs(c[0])))
    return best_step, best_bleu


@dataclass
class LineSearchStep:
    feature: int
    step: float
    bleu: float


def optimize_over_pool(
    pool: TuningPool,
    start,
    num_restarts: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    trace: list[list[LineSearchStep]] | None = None,
) -> np.ndarray:
    """Coordinate ascent with exact line search, from ``start`` and random restarts.

    Only strictly improving steps are accepted, so the pool BLEU of the
    result is never below that of ``start``.  When ``trace`` is given, the
    accepted steps of the winning run are appended to it as one list.
    """
    start = np.asarray(start, dtype=float)
    rng = np.random.default_rng(seed)
    starts = [start]
    for _ in range(num_restarts):
        w = rng.uniform(-1.0, 1.0, size=N_FEATURES)
        w[LM] = abs(w[LM])
        starts.append(w)

    best_w, best_bleu = start, pool_bleu(pool, start)
    best_steps = [LineSearchStep(-1, 0.0, best_bleu)]
    for w0 in starts:
        w, score, steps = _coordinate_ascent(pool, w0)
        if score > best_bleu + _IMPROVEMENT:
            best_w, best_bleu, best_steps = w, score, steps
    if trace is not None:
        trace.append(best_steps)
    return best_w


def _coordinate_ascent(pool, w):
    w = np.array(w, dtype=float)
    current = pool_bleu(pool, w)
    steps = [LineSearchStep(-1, 0.0, current)]
    for _ in range(MAX_PASSES):
        best = None
        for f in range(N_FEATURES):
            direction = np.zeros(N_FEATURES)
            direction[f] = 1.0
            step, score = line_search(pool, w, direction)
            if score > current + _IMPROVEMENT and (best is None or score > best[2]):
                best = (f, step, score)
        if best is None:
            break
        f, step, _ = best
        candidate = w.copy()
        candidate[f] += step
        actual = pool_bleu(pool, candidate)
        if actual <= current + _IMPROVEMENT:
            break
        w, current = candidate, actual
        steps.append(LineSearchStep(f, step, actual))
    scale = np.abs(w).max()
    if scale > 0:
        w = w / scale
    return w, current, steps


# -- outer loop -------------------------------------------------------------


@dataclass
class TuningIteration:
    weights: np.ndarray
    dev_bleu: float
    pool_bleu: float
    new_candidates: int


@dataclass
class TuningTrace:
    iterations: list[TuningIteration] = field(default_factory=list)
    # accepted line-search steps of each pool optimization, one list per iteration
    line_search: list[list[LineSearchStep]] = field(default_factory=list)

    def best(self) -> TuningIteration:
        return max(self.iterations, key=lambda it: it.dev_bleu)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for k, it in enumerate(self.iterations, 1):
                ws = " ".join(f"{v:.6g}" for v in it.weights)
                fh.write(f"{k} {ws} {it.dev_bleu:.4f}\n")


def tune(
    model: TranslationModel,
    dev_src: Sequence[Sequence[str]],
    dev_refs: Sequence[Sequence[Sequence[str]]],
    init=None,
    max_iterations: int = DEFAULT_ITERATIONS,
    nbest_size: int = DEFAULT_NBEST,
    num_restarts: int = DEFAULT_RESTARTS,
    seed: int = DEFAULT_SEED,
    stack_size: int | None = None,
    distortion_limit: int | None = None,
) -> tuple[np.ndarray, TuningTrace]:
    """Alternate n-best decoding of the dev set with pool optimization.

    Returns the weights whose 1-best dev decode scored the highest corpus
    BLEU over all iterations (earliest wins ties), plus the trace.
    """
    if len(dev_src) == 0:
        raise ValueError("empty development corpus")
    if len(dev_src) != len(dev_refs):
        raise ValueError("development source and reference counts differ")
    weights = np.asarray(model.weights if init is None else init, dtype=float)
    if not np.all(np.isfinite(weights)):
        raise ValueError("initial weights must be finite")
    pool = TuningPool([[tuple(r) for r in refs] for refs in dev_refs])
    trace = TuningTrace()

    for it in range(max_iterations):
        current = model.with_weights(weights)
        one_best = []
        added = 0
        for s, src in enumerate(dev_src):
            result = translate(current, src, stack_size, distortion_limit, nbest_size)
            one_best.append(result.best)
            for entry in result.nbest:
                added += pool.add(s, entry.tokens, entry.features)
        stats = np.sum([bleu_sufficient_stats(h, r) for h, r in zip(one_best, pool.references)], axis=0)
        dev = stats_to_bleu(stats).score
        log.info("tuning iteration %d: dev BLEU %.2f, %d new candidates", it + 1, dev, added)
        if added == 0 and it > 0:
            trace.iterations.append(TuningIteration(weights.copy(), dev, pool_bleu(pool, weights), 0))
            break
        new_weights = optimize_over_pool(pool, weights, num_restarts, seed + it, trace.line_search)
        trace.iterations.append(TuningIteration(weights.copy(), dev, pool_bleu(pool, new_weights), added))
        weights = new_weights

    return trace.best().weights, trace
