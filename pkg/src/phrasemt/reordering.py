"""Lexicalized monotone/swap/discontinuous reordering statistics."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

from phrasemt.phrase_model import PhrasePair, read_text_rows, write_text_table

DEFAULT_SIGMA = 0.5
N_REORDERING_SCORES = 6


class Orientation(IntEnum):
    MONOTONE = 0
    SWAP = 1
    DISCONTINUOUS = 2


UNIFORM = (1 / 3, 1 / 3, 1 / 3)


def orientation_of(prev_src: tuple[int, int], cur_src: tuple[int, int]) -> Orientation:
    """Orientation of the current source span relative to the previous one."""
    if cur_src[0] == prev_src[1] + 1:
        return Orientation.MONOTONE
    if cur_src[1] == prev_src[0] - 1:
        return Orientation.SWAP
    return Orientation.DISCONTINUOUS


def classify_orientation(prev_pair: PhrasePair, cur_pair: PhrasePair) -> Orientation:
    return orientation_of(prev_pair.src_span, cur_pair.src_span)


@dataclass(frozen=True)
class ReorderingEntry:
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    forward: tuple[float, float, float]
    backward: tuple[float, float, float]

    @property
    def scores(self) -> tuple[float, ...]:
        return self.forward + self.backward


def _best(orients: Iterable[Orientation]) -> Orientation | None:
    found = list(orients)
    return min(found) if found else None


def sentence_orientations(
    phrases: Sequence[PhrasePair], src_len: int, tgt_len: int
) -> list[tuple[PhrasePair, Orientation, Orientation]]:
    """(pair, forward, backward) for every extracted pair of one sentence.

    The neighbour on each side is any extracted pair adjacent in the target;
    when several exist the preference is monotone, then swap.  Sentence
    edges are virtual phrases at source positions -1 and ``src_len``.
    """
    ending_at: dict[int, list[PhrasePair]] = defaultdict(list)
    starting_at: dict[int, list[PhrasePair]] = defaultdict(list)
    for p in phrases:
        ending_at[p.tgt_span[1]].append(p)
        starting_at[p.tgt_span[0]].append(p)
    start_edge = (-1, -1)
    end_edge = (src_len, src_len)

    out = []
    for p in phrases:
        if p.tgt_span[0] == 0:
            bwd = orientation_of(start_edge, p.src_span)
        else:
            bwd = _best(orientation_of(q.src_span, p.src_span) for q in ending_at[p.tgt_span[0] - 1])
        if p.tgt_span[1] == tgt_len - 1:
            fwd = orientation_of(p.src_span, end_edge)
        else:
            fwd = _best(orientation_of(p.src_span, q.src_span) for q in starting_at[p.tgt_span[1] + 1])
        out.append((p, Orientation.DISCONTINUOUS if fwd is None else fwd,
                    Orientation.DISCONTINUOUS if bwd is None else bwd))
    return out


def smoothed(counts: Sequence[float], sigma: float) -> tuple[float, float, float]:
    total = sum(counts)
    return tuple((c + sigma / 3) / (total + sigma) for c in counts)


def train_reordering(
    per_sentence: Sequence[Sequence[PhrasePair]],
    lengths: Sequence[tuple[int, int]],
    sigma: float = DEFAULT_SIGMA,
) -> list[ReorderingEntry]:
    """Accumulate orientation counts per phrase pair and smooth toward uniform."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    fwd_counts: dict[tuple, list[int]] = defaultdict(lambda: [0, 0, 0])
    bwd_counts: dict[tuple, list[int]] = defaultdict(lambda: [0, 0, 0])
    for phrases, (n, m) in zip(per_sentence, lengths):
        for p, fwd, bwd in sentence_orientations(phrases, n, m):
            key = (p.src, p.tgt)
            fwd_counts[key][fwd] += 1
            bwd_counts[key][bwd] += 1
    return [
        ReorderingEntry(s, t, smoothed(fwd_counts[(s, t)], sigma), smoothed(bwd_counts[(s, t)], sigma))
        for s, t in sorted(fwd_counts)
    ]


def save_reordering_table(path, entries: Iterable[ReorderingEntry]) -> None:
    write_text_table(path, ((e.src, e.tgt, e.scores) for e in entries))


def read_reordering_rows(path) -> list[tuple]:
    return read_text_rows(path, N_REORDERING_SCORES)


class ReorderingTable:
    """(src, tgt) -> six probabilities; unknown pairs get the uniform prior."""

    def __init__(self, rows: Iterable[tuple] = ()):
        self._table = {(tuple(s), tuple(t)): tuple(sc) for s, t, sc in rows}

    def __len__(self) -> int:
        return len(self._table)

    def get(self, src, tgt) -> tuple[float, ...]:
        return self._table.get((tuple(src), tuple(tgt)), UNIFORM + UNIFORM)


class BinaryReorderingTable(ReorderingTable):
    """Reordering lookups backed by a binarised table."""

    def __init__(self, table):
        self._bin = table
        self._cache: dict[tuple, dict] = {}

    def __len__(self) -> int:
        return len(self._bin)

    def get(self, src, tgt) -> tuple[float, ...]:
        src = tuple(src)
        by_tgt = self._cache.get(src)
        if by_tgt is None:
            by_tgt = dict(self._bin.lookup(src))
            self._cache[src] = by_tgt
        return by_tgt.get(tuple(tgt), UNIFORM + UNIFORM)
