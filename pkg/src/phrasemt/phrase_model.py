"""Phrase-pair extraction from word alignments and phrase-table scoring."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from phrasemt.aligner import NULL, AlignmentMatrix, LexicalTable
from phrasemt.binary_table import BinaryTable, write_table

DEFAULT_MAX_PHRASE_LEN = 7
FIELD_SEP = " ||| "
N_PHRASE_SCORES = 4
LEX_FLOOR = 1e-12


@dataclass(frozen=True, order=True)
class PhrasePair:
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    src_span: tuple[int, int]
    tgt_span: tuple[int, int]
    # links inside the pair, relative to the span starts
    alignment: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class PhraseTableEntry:
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    # phi(src|tgt), lex(src|tgt), phi(tgt|src), lex(tgt|src)
    scores: tuple[float, float, float, float]


def extract_phrases(
    src: Sequence[str],
    tgt: Sequence[str],
    alignment: AlignmentMatrix,
    max_phrase_len: int = DEFAULT_MAX_PHRASE_LEN,
) -> set[PhrasePair]:
    """All alignment-consistent phrase pairs, unaligned edge words included."""
    n, m = len(src), len(tgt)
    if (alignment.src_len, alignment.tgt_len) != (n, m):
        raise ValueError(
            f"alignment is {alignment.src_len}x{alignment.tgt_len} but the pair is {n}x{m}"
        )
    if max_phrase_len < 1:
        raise ValueError("max_phrase_len must be >= 1")
    links = sorted(alignment.links)
    tgt_aligned = [False] * m
    for _, j in links:
        tgt_aligned[j] = True

    out = set()
    for s0 in range(n):
        for s1 in range(s0, min(n, s0 + max_phrase_len)):
            inside = [j for i, j in links if s0 <= i <= s1]
            if not inside:
                continue
            t0, t1 = min(inside), max(inside)
            if t1 - t0 + 1 > max_phrase_len:
                continue
            if any(t0 <= j <= t1 and not s0 <= i <= s1 for i, j in links):
                continue
            ts = t0
            while True:
                te = t1
                while True:
                    out.add(_make_pair(src, tgt, links, s0, s1, ts, te))
                    te += 1
                    if te >= m or tgt_aligned[te] or te - ts + 1 > max_phrase_len:
                        break
                ts -= 1
                if ts < 0 or tgt_aligned[ts] or t1 - ts + 1 > max_phrase_len:
                    break
    return out


def _make_pair(src, tgt, links, s0, s1, t0, t1) -> PhrasePair:
    inner = tuple((i - s0, j - t0) for i, j in links if s0 <= i <= s1 and t0 <= j <= t1)
    return PhrasePair(tuple(src[s0:s1 + 1]), tuple(tgt[t0:t1 + 1]), (s0, s1), (t0, t1), inner)


def extract_corpus(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    alignments: Sequence[AlignmentMatrix],
    max_phrase_len: int = DEFAULT_MAX_PHRASE_LEN,
) -> list[list[PhrasePair]]:
    """Per sentence pair, its extracted phrase pairs in sorted order."""
    return [
        sorted(extract_phrases(s, t, a, max_phrase_len)) for (s, t), a in zip(pairs, alignments)
    ]


def lexical_weight(
    gen: Sequence[str], cond: Sequence[str], links: Iterable[tuple[int, int]], table: LexicalTable
) -> float:
    """Product over generated words of the mean t(gen | cond) over their links.

    ``links`` are (cond_index, gen_index); unlinked words use t(gen | NULL).
    """
    linked: dict[int, list[int]] = defaultdict(list)
    for i, j in links:
        linked[j].append(i)
    w = 1.0
    for j, word in enumerate(gen):
        if j in linked:
            w *= sum(max(table.prob(word, cond[i]), LEX_FLOOR) for i in linked[j]) / len(linked[j])
        else:
            w *= max(table.prob(word, NULL), LEX_FLOOR)
    return w


def score_phrases(
    extracted: Iterable[PhrasePair], lex_f2e: LexicalTable, lex_e2f: LexicalTable
) -> list[PhraseTableEntry]:
    """Relative frequencies in both directions plus both lexical weights.

    ``lex_f2e`` holds t(target | source), ``lex_e2f`` holds t(source | target).
    The lexical weights use the most frequent inner alignment of each pair.
    """
    pair_counts: Counter = Counter()
    align_counts: dict[tuple, Counter] = defaultdict(Counter)
    for p in extracted:
        key = (p.src, p.tgt)
        pair_counts[key] += 1
        align_counts[key][p.alignment] += 1
    src_totals: Counter = Counter()
    tgt_totals: Counter = Counter()
    for (s, t), c in pair_counts.items():
        src_totals[s] += c
        tgt_totals[t] += c

    entries = []
    for (s, t) in sorted(pair_counts):
        c = pair_counts[(s, t)]
        inner = min(align_counts[(s, t)].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        lex_tgt = lexical_weight(t, s, inner, lex_f2e)
        lex_src = lexical_weight(s, t, [(j, i) for i, j in inner], lex_e2f)
        entries.append(PhraseTableEntry(s, t, (c / tgt_totals[t], lex_src, c / src_totals[s], lex_tgt)))
    return entries


# -- in-memory table and files ----------------------------------------------


class PhraseTable:
    """Source phrase -> list of (target phrase, scores)."""

    def __init__(self, rows: Iterable[tuple[tuple[str, ...], tuple[str, ...], Sequence[float]]] = ()):
        self._table: dict[tuple[str, ...], list] = defaultdict(list)
        for src, tgt, scores in rows:
            self._table[tuple(src)].append((tuple(tgt), tuple(scores)))
        self._table = dict(self._table)
        self.max_src_len = max((len(s) for s in self._table), default=0)

    @classmethod
    def from_entries(cls, entries: Iterable[PhraseTableEntry]) -> "PhraseTable":
        return cls((e.src, e.tgt, e.scores) for e in entries)

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, src) -> bool:
        return tuple(src) in self._table

    def lookup(self, src: Sequence[str]) -> list:
        return self._table.get(tuple(src), [])

    def sources(self) -> list[tuple[str, ...]]:
        return sorted(self._table)

    def rows(self) -> list:
        return [(s, t, sc) for s in self.sources() for t, sc in sorted(self._table[s])]


def format_row(src: Sequence[str], tgt: Sequence[str], scores: Sequence[float]) -> str:
    return FIELD_SEP.join((" ".join(src), " ".join(tgt), " ".join(f"{v:.7g}" for v in scores)))


def parse_row(line: str, n_scores: int, where: str = "") -> tuple:
    fields = line.rstrip("\n").split(FIELD_SEP)
    if len(fields) != 3:
        raise ValueError(f"{where}: expected 3 fields separated by '{FIELD_SEP.strip()}'")
    try:
        scores = tuple(float(v) for v in fields[2].split())
    except ValueError:
        raise ValueError(f"{where}: non-numeric score") from None
    if len(scores) != n_scores:
        raise ValueError(f"{where}: expected {n_scores} scores, got {len(scores)}")
    return tuple(fields[0].split()), tuple(fields[1].split()), scores


def write_text_table(path, rows: Iterable[tuple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for src, tgt, scores in rows:
            fh.write(format_row(src, tgt, scores) + "\n")


def read_text_rows(path, n_scores: int) -> list[tuple]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                rows.append(parse_row(line, n_scores, f"{path}:{lineno}"))
    return rows


def save_phrase_table(path, entries: Iterable[PhraseTableEntry]) -> None:
    write_text_table(path, ((e.src, e.tgt, e.scores) for e in entries))


def read_phrase_table(path) -> PhraseTable:
    return PhraseTable(read_text_rows(path, N_PHRASE_SCORES))


def binarise_phrase_table(rows: Iterable[tuple], destination, n_scores: int = N_PHRASE_SCORES) -> None:
    write_table(destination, rows, n_scores)


def load_phrase_table(source, src_sentence: Sequence[str]) -> dict[tuple[str, ...], list]:
    """Entries whose source phrase occurs in ``src_sentence``, keyed by phrase.

    Only spans up to the table's longest source phrase are probed.
    """
    table = source if isinstance(source, BinaryTable) else BinaryTable(source)
    found = {}
    n = len(src_sentence)
    for i in range(n):
        for j in range(i + 1, min(n, i + table.max_src_len) + 1):
            span = tuple(src_sentence[i:j])
            if span in found:
                continue
            hits = table.lookup(span)
            if hits:
                found[span] = hits
    return found


# -- extract files -----------------------------------------------------------


def write_extract(path, per_sentence: Sequence[Sequence[PhrasePair]]) -> None:
    """One line per phrase occurrence: sentence id, phrases, spans, inner links."""
    with open(path, "w", encoding="utf-8") as fh:
        for sid, phrases in enumerate(per_sentence):
            for p in phrases:
                spans = f"{p.src_span[0]} {p.src_span[1]} {p.tgt_span[0]} {p.tgt_span[1]}"
                links = " ".join(f"{i}-{j}" for i, j in p.alignment)
                fh.write(FIELD_SEP.join((str(sid), " ".join(p.src), " ".join(p.tgt), spans, links)) + "\n")


def read_extract(path, n_sentences: int) -> list[list[PhrasePair]]:
    out: list[list[PhrasePair]] = [[] for _ in range(n_sentences)]
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.rstrip("\n").split(FIELD_SEP)
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: malformed extract line")
            sid = int(fields[0])
            s0, s1, t0, t1 = (int(v) for v in fields[3].split())
            links = tuple(
                (int(a), int(b)) for a, _, b in (tok.partition("-") for tok in fields[4].split())
            )
            out[sid].append(
                PhrasePair(tuple(fields[1].split()), tuple(fields[2].split()), (s0, s1), (t0, t1), links)
            )
    return out
