"""N-gram language models over the target language (orders 1 to 5).

A sentence x_1..x_n is scored as the product of q(x_i | history) over the
tokens plus a final STOP, with the history padded by ``order - 1`` start
symbols.  Histories are stored as tuples; the model never predicts the
start symbol and never conditions on STOP.
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Sequence

START = "*"
STOP = "STOP"
UNK = "UNK"

ARPA_START = "<s>"
ARPA_STOP = "</s>"
ARPA_UNK = "<unk>"

MAX_ORDER = 5
DEFAULT_ORDER = 3
SMOOTHING_METHODS = ("witten-bell", "mle")

# Returned by sentence_logprob when some factor has probability zero.
ZERO_PROB = float("-inf")

_LN10 = math.log(10.0)
_ARPA_ZERO = -99.0

_TO_ARPA = {START: ARPA_START, STOP: ARPA_STOP, UNK: ARPA_UNK}
_FROM_ARPA = {v: k for k, v in _TO_ARPA.items()}


class ARPAFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


def is_zero_prob(logprob: float) -> bool:
    return logprob == ZERO_PROB


class NGramLanguageModel:
    """Counts, conditional probabilities and backoff weights of an n-gram model.

    ``counts[k]`` maps k-gram tuples to integer counts, ``probs`` maps
    (history + word) tuples to q(word | history) and ``backoff`` maps
    histories to the mass left for the shorter history.  MLE models have no
    backoff and give probability zero to unseen events.
    """

    def __init__(self, order: int):
        if not 1 <= order <= MAX_ORDER:
            raise ValueError(f"order must be in [1, {MAX_ORDER}], got {order}")
        self.order = order
        self.vocabulary: set[str] = {STOP, UNK}
        self.counts: dict[int, dict[tuple, int]] = {k: {} for k in range(1, order + 1)}
        self.probs: dict[tuple, float] = {}
        self.backoff: dict[tuple, float] = {}
        self.smoothing: str | None = None
        self._cache: dict[tuple, float] = {}

    # -- counting helpers -------------------------------------------------

    def context_totals(self, k: int) -> dict[tuple, int]:
        """Sum of k-gram counts per (k-1)-token history."""
        totals: dict[tuple, int] = defaultdict(int)
        for gram, c in self.counts[k].items():
            totals[gram[:-1]] += c
        return dict(totals)

    def continuations(self, k: int) -> dict[tuple, int]:
        """Number of distinct words following each (k-1)-token history."""
        n1 = defaultdict(int)
        for gram in self.counts[k]:
            n1[gram[:-1]] += 1
        return dict(n1)

    @property
    def words(self) -> set[str]:
        return self.vocabulary - {STOP, UNK}

    # -- queries ----------------------------------------------------------

    def prob(self, word: str, history: Sequence[str] = ()) -> float:
        """q(word | history) with backoff; the history is truncated to order-1."""
        if word not in self.vocabulary:
            word = UNK
        h = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        key = h + (word,)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        p = self._prob(word, h)
        self._cache[key] = p
        return p

    def _prob(self, word: str, h: tuple) -> float:
        if self.smoothing == "mle":
            return self.probs.get(h + (word,), 0.0)
        weight = 1.0
        while True:
            p = self.probs.get(h + (word,))
            if p is not None:
                return weight * p
            if not h:
                return 0.0
            weight *= self.backoff.get(h, 1.0)
            h = h[1:]

    def logprob(self, word: str, history: Sequence[str] = ()) -> float:
        p = self.prob(word, history)
        return math.log(p) if p > 0.0 else ZERO_PROB

    def padded(self, tokens: Sequence[str]) -> list[str]:
        return [START] * (self.order - 1) + list(tokens) + [STOP]

    def sentence_logprob(self, tokens: Sequence[str]) -> float:
        """Natural-log probability of a sentence including its STOP factor."""
        seq = self.padded([t if t in self.vocabulary else UNK for t in tokens])
        total = 0.0
        for i in range(self.order - 1, len(seq)):
            lp = self.logprob(seq[i], seq[i - self.order + 1:i])
            if lp == ZERO_PROB:
                return ZERO_PROB
            total += lp
        return total


def count_ngrams(corpus: Sequence[Sequence[str]], order: int = DEFAULT_ORDER) -> NGramLanguageModel:
    model = NGramLanguageModel(order)
    if len(corpus) == 0:
        raise ValueError("cannot count n-grams over an empty corpus")
    counts = {k: defaultdict(int) for k in range(1, order + 1)}
    for sent in corpus:
        seq = model.padded(sent)
        model.vocabulary.update(sent)
        for i in range(order - 1, len(seq)):
            for k in range(1, order + 1):
                counts[k][tuple(seq[i - k + 1:i + 1])] += 1
    model.counts = {k: dict(v) for k, v in counts.items()}
    return model


def estimate_mle(model: NGramLanguageModel) -> NGramLanguageModel:
    """Relative frequencies Count(h, w) / Count(h) for every order."""
    model.probs = {}
    model.backoff = {}
    for k in range(1, model.order + 1):
        totals = model.context_totals(k)
        for gram, c in model.counts[k].items():
            model.probs[gram] = c / totals[gram[:-1]]
    model.smoothing = "mle"
    model._cache.clear()
    return model


def smooth(model: NGramLanguageModel, method: str = "witten-bell") -> NGramLanguageModel:
    """Interpolated Witten-Bell smoothing stored in backoff form.

    q(w|h) = lam(h) * q_mle(w|h) + (1 - lam(h)) * q(w|h[1:]) with
    lam(h) = Count(h) / (Count(h) + N1+(h)).  For an unseen continuation the
    first term vanishes, so the backoff weight of h is exactly 1 - lam(h).
    The unigram base reserves 1 / (|V| + 1) for UNK.
    """
    if method == "mle":
        return estimate_mle(model)
    if method != "witten-bell":
        raise ValueError(f"unknown smoothing method {method!r}")

    probs: dict[tuple, float] = {}
    backoff: dict[tuple, float] = {}

    unigrams = model.counts[1]
    total = sum(unigrams.values())
    unk_floor = 1.0 / (len(model.words) + 1)
    for (w,), c in unigrams.items():
        probs[(w,)] = (1.0 - unk_floor) * c / total
    probs[(UNK,)] = unk_floor + probs.get((UNK,), 0.0)

    def lower(word: str, h: tuple) -> float:
        weight = 1.0
        while True:
            p = probs.get(h + (word,))
            if p is not None:
                return weight * p
            weight *= backoff.get(h, 1.0)
            h = h[1:]

    for k in range(2, model.order + 1):
        totals = model.context_totals(k)
        n1 = model.continuations(k)
        for h, c_h in totals.items():
            backoff[h] = n1[h] / (c_h + n1[h])
        for gram, c in sorted(model.counts[k].items()):
            h, w = gram[:-1], gram[-1]
            lam = totals[h] / (totals[h] + n1[h])
            probs[gram] = lam * c / totals[h] + (1.0 - lam) * lower(w, h[1:])

    model.probs = probs
    model.backoff = backoff
    model.smoothing = "witten-bell"
    model._cache.clear()
    return model


def train_lm(
    corpus: Sequence[Sequence[str]], order: int = DEFAULT_ORDER, smoothing: str = "witten-bell"
) -> NGramLanguageModel:
    if smoothing not in SMOOTHING_METHODS:
        raise ValueError(f"unknown smoothing method {smoothing!r}")
    return smooth(count_ngrams(corpus, order), smoothing)


# -- ARPA persistence ------------------------------------------------------


def _arpa_token(tok: str) -> str:
    return _TO_ARPA.get(tok, tok)


def _log10(p: float) -> float:
    return math.log10(p) if p > 0 else _ARPA_ZERO


def export_arpa(model: NGramLanguageModel, destination) -> None:
    """Write the model in ARPA format (log10 values, <s>/</s>/<unk> symbols).

    Histories that are never predicted themselves (start-symbol runs) are
    written with probability -99 so their backoff weights survive.
    """
    if model.smoothing is None:
        raise ValueError("model has no probabilities; call estimate_mle or smooth first")
    sections: dict[int, dict[tuple, tuple[float, float | None]]] = {
        k: {} for k in range(1, model.order + 1)
    }
    for gram, p in model.probs.items():
        sections[len(gram)][gram] = (p, None)
    for h, bo in model.backoff.items():
        k = len(h)
        p = sections[k].get(h, (0.0, None))[0]
        sections[k][h] = (p, bo)

    with open(destination, "w", encoding="utf-8") as fh:
        fh.write(f"# smoothing: {model.smoothing}\n")
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(sections[k])}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for gram in sorted(sections[k]):
                p, bo = sections[k][gram]
                line = f"{_log10(p)!r}\t{' '.join(_arpa_token(t) for t in gram)}"
                if k < model.order and model.smoothing != "mle":
                    line += f"\t{_log10(bo if bo is not None else 1.0)!r}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def import_arpa(source) -> NGramLanguageModel:
    with open(source, encoding="utf-8") as fh:
        lines = fh.read().split("\n")

    smoothing = "witten-bell"
    declared: dict[int, int] = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        line = lines[i].strip()
        if line.startswith("# smoothing:"):
            smoothing = line.split(":", 1)[1].strip()
        i += 1
    if i == len(lines):
        raise ARPAFormatError("missing \\data\\ header")
    i += 1
    while i < len(lines) and lines[i].startswith("ngram "):
        try:
            k, n = lines[i][6:].split("=")
            declared[int(k)] = int(n)
        except ValueError:
            raise ARPAFormatError(f"bad n-gram count line {lines[i]!r}", i + 1) from None
        i += 1
    if not declared:
        raise ARPAFormatError("missing n-gram count header", i + 1)
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise ARPAFormatError("n-gram count header must list orders 1..N", i)

    model = NGramLanguageModel(order)
    model.smoothing = smoothing
    seen = {k: 0 for k in declared}
    k = None
    ended = False
    for j in range(i, len(lines)):
        line = lines[j].strip()
        if not line:
            continue
        if line == "\\end\\":
            ended = True
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                k = int(line[1:-7])
            except ValueError:
                raise ARPAFormatError(f"bad section header {line!r}", j + 1) from None
            if k not in declared:
                raise ARPAFormatError(f"undeclared section {k}", j + 1)
            continue
        if k is None:
            raise ARPAFormatError("n-gram line outside a section", j + 1)
        fields = lines[j].split("\t")
        if len(fields) not in (2, 3):
            raise ARPAFormatError("expected 'logprob<TAB>ngram[<TAB>backoff]'", j + 1)
        gram = tuple(_FROM_ARPA.get(t, t) for t in fields[1].split())
        if len(gram) != k:
            raise ARPAFormatError(f"expected {k} tokens, got {len(gram)}", j + 1)
        try:
            logp = float(fields[0])
            bo = float(fields[2]) if len(fields) == 3 else None
        except ValueError:
            raise ARPAFormatError("non-numeric probability", j + 1) from None
        seen[k] += 1
        if logp > _ARPA_ZERO:
            model.probs[gram] = 10.0 ** logp
        if bo is not None and smoothing != "mle":
            model.backoff[gram] = 10.0 ** bo
        if k == 1 and gram[0] != START:
            model.vocabulary.add(gram[0])
    if not ended:
        raise ARPAFormatError("missing \\end\\ terminator", len(lines))
    for kk, n in declared.items():
        if seen[kk] != n:
            raise ARPAFormatError(f"section {kk} declares {n} entries, found {seen[kk]}")
    # backoff entries exist only for observed histories; drop the defaults
    histories = _histories(model)
    model.backoff = {h: b for h, b in model.backoff.items() if h in histories}
    return model


def _histories(model: NGramLanguageModel) -> set[tuple]:
    return {g[:-1] for g in model.probs if len(g) > 1}


def train_lm_file(corpus_path, order: int, smoothing: str, out_path) -> NGramLanguageModel:
    from phrasemt.corpus_prep import read_tokenized

    model = train_lm(read_tokenized(corpus_path), order, smoothing)
    export_arpa(model, out_path)
    return model


def iter_contexts(model: NGramLanguageModel) -> Iterable[tuple]:
    """Every history observed in training, at every order."""
    for k in range(1, model.order + 1):
        yield from model.context_totals(k)
