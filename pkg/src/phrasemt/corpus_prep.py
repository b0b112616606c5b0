"""Parallel-text preparation: normalization, tokenization, truecasing, cleaning.

Sentences are plain lists of token strings throughout the package; the
language of a stream is carried by the file it came from.
"""
from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PUNCTUATION = ".,!?;:\"'()[]،؟"
CASE_POLICIES = ("lowercase", "uppercase", "none")

DEFAULT_MAX_LEN = 80
DEFAULT_MAX_RATIO = 9.0

_punct_class = "[" + re.escape(PUNCTUATION) + "]"
_TOKEN_RE = re.compile(rf"{_punct_class}|[^\s{re.escape(PUNCTUATION)}]+")


def tokenize(raw_line: str, language: str = "source") -> list[str]:
    """Split punctuation marks off as standalone tokens and collapse whitespace.

    >>> tokenize("don't stop, now")
    ['don', "'", 't', 'stop', ',', 'now']
    """
    return _TOKEN_RE.findall(raw_line)


def normalize(tokens: Sequence[str], policy: str = "lowercase") -> list[str]:
    if policy == "lowercase":
        return [t.lower() for t in tokens]
    if policy == "uppercase":
        return [t.upper() for t in tokens]
    if policy == "none":
        return list(tokens)
    raise ValueError(f"unknown case policy {policy!r}")


@dataclass
class TruecaseModel:
    """Most frequent surface form per case-folded token."""

    best_form: dict[str, str] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def save(self, path) -> None:
        # one "surface_form count" line per surface form, grouped by folded key
        by_key = defaultdict(list)
        for form, n in self.counts.items():
            by_key[form.lower()].append(form)
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(by_key):
                for form in sorted(by_key[key]):
                    fh.write(f"{form} {self.counts[form]}\n")

    @classmethod
    def load(cls, path) -> "TruecaseModel":
        counts = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2 or not parts[1].isdigit():
                    raise ValueError(f"{path}:{lineno}: expected 'surface_form count'")
                counts[parts[0]] = int(parts[1])
        return cls(best_form=_best_forms(counts), counts=counts)


def _best_forms(counts: dict[str, int]) -> dict[str, str]:
    groups: dict[str, list[str]] = defaultdict(list)
    for form in counts:
        groups[form.lower()].append(form)
    # highest count wins, ties go to the lexicographically smallest form
    return {key: min(forms, key=lambda f: (-counts[f], f)) for key, forms in groups.items()}


def train_truecaser(corpus: Iterable[Sequence[str]]) -> TruecaseModel:
    """Count surface forms; sentence-initial tokens are counted case-folded."""
    counts: Counter[str] = Counter()
    n_sentences = 0
    for sent in corpus:
        n_sentences += 1
        for pos, tok in enumerate(sent):
            counts[tok.lower() if pos == 0 else tok] += 1
    if n_sentences == 0:
        raise ValueError("cannot train a truecaser on an empty corpus")
    counts = dict(counts)
    return TruecaseModel(best_form=_best_forms(counts), counts=counts)


def apply_truecase(model: TruecaseModel, tokens: Sequence[str]) -> list[str]:
    return [model.best_form.get(t.lower(), t) for t in tokens]


def restore_case(model: TruecaseModel | None, tokens: Sequence[str]) -> list[str]:
    """Map tokens to their preferred surface form and capitalize the first one."""
    out = apply_truecase(model, tokens) if model is not None else list(tokens)
    if out:
        out[0] = out[0][:1].upper() + out[0][1:]
    return out


_NO_SPACE_BEFORE = set(".,!?;:)]،؟")
_NO_SPACE_AFTER = set("([")


def detokenize(tokens: Sequence[str]) -> str:
    """Inverse of :func:`tokenize` for ordinary punctuation placement.

    >>> detokenize(["hello", ",", "world", "."])
    'hello, world.'
    """
    out = []
    glue = True
    for tok in tokens:
        if out and not glue and tok not in _NO_SPACE_BEFORE:
            out.append(" ")
        out.append(tok)
        glue = tok in _NO_SPACE_AFTER
    return "".join(out)


def clean_corpus(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    max_len: int = DEFAULT_MAX_LEN,
    max_ratio: float = DEFAULT_MAX_RATIO,
) -> list[tuple[list[str], list[str]]]:
    """Drop pairs with an empty side, an over-long side, or a skewed length ratio."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if max_ratio < 1:
        raise ValueError("max_ratio must be >= 1")
    kept = []
    for src, tgt in pairs:
        ls, lt = len(src), len(tgt)
        if ls == 0 or lt == 0:
            continue
        if ls > max_len or lt > max_len:
            continue
        if max(ls, lt) / min(ls, lt) > max_ratio:
            continue
        kept.append((list(src), list(tgt)))
    return kept


@dataclass
class PreparedCorpus:
    pairs: list[tuple[list[str], list[str]]]
    truecase_src: TruecaseModel
    truecase_tgt: TruecaseModel


def prepare_sentence(raw_line: str, policy: str, truecaser: TruecaseModel | None = None) -> list[str]:
    """Single-sentence path shared by training data and translation input."""
    tokens = tokenize(" ".join(normalize(raw_line.split(), policy)))
    if truecaser is not None and policy == "none":
        tokens = apply_truecase(truecaser, tokens)
    return tokens


def prepare_corpus(
    src_lines: Sequence[str],
    tgt_lines: Sequence[str],
    case: str = "lowercase",
    max_len: int = DEFAULT_MAX_LEN,
    max_ratio: float = DEFAULT_MAX_RATIO,
) -> PreparedCorpus:
    """Run normalize -> tokenize -> truecase -> clean over a parallel corpus.

    Truecase models are trained on the original-casing token stream so the
    casing signal survives a lowercasing policy; they are kept for restoring
    case on decoder output.
    """
    if len(src_lines) != len(tgt_lines):
        raise ValueError(
            f"parallel corpus sides differ in length: {len(src_lines)} vs {len(tgt_lines)}"
        )
    if case not in CASE_POLICIES:
        raise ValueError(f"unknown case policy {case!r}")

    sides = []
    models = []
    for lines in (src_lines, tgt_lines):
        normalized = [normalize(line.split(), case) for line in lines]
        tokens = [tokenize(" ".join(n)) for n in normalized]
        model = train_truecaser([tokenize(line) for line in lines] or [[]])
        if case == "none":
            tokens = [apply_truecase(model, t) for t in tokens]
        sides.append(tokens)
        models.append(model)

    pairs = clean_corpus(list(zip(*sides)), max_len=max_len, max_ratio=max_ratio)
    return PreparedCorpus(pairs=pairs, truecase_src=models[0], truecase_tgt=models[1])


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").rstrip("\r") for line in fh]


def read_tokenized(path) -> list[list[str]]:
    return [line.split() for line in read_lines(path)]


def write_tokenized(path, sentences: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")


def write_prepared(prepared: PreparedCorpus, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tokenized(out / "corpus.src", (s for s, _ in prepared.pairs))
    write_tokenized(out / "corpus.tgt", (t for _, t in prepared.pairs))
    prepared.truecase_src.save(out / "truecase.src")
    prepared.truecase_tgt.save(out / "truecase.tgt")
