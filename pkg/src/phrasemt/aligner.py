"""Word alignment with IBM Models 1 and 2, Viterbi decoding and symmetrization.

Training takes pairs ``(cond, gen)`` and learns t(gen_word | cond_word) with
a NULL word on the conditioning side.  Passing ``(source, target)`` pairs
gives the forward direction; swapping the pairs gives the reverse one.
The E-step runs through :mod:`phrasemt.kernels`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from phrasemt import kernels

log = logging.getLogger(__name__)

NULL = "NULL"
PROB_FLOOR = 1e-12
HEURISTICS = ("intersection", "union", "grow-diag-final-and")
HEURISTIC_ALIASES = {"gdfa": "grow-diag-final-and"}

Pair = tuple[Sequence[str], Sequence[str]]


@dataclass(frozen=True)
class AlignmentMatrix:
    src_len: int
    tgt_len: int
    links: frozenset = frozenset()

    def __post_init__(self):
        for i, j in self.links:
            if not (0 <= i < self.src_len and 0 <= j < self.tgt_len):
                raise ValueError(f"link {i}-{j} outside {self.src_len}x{self.tgt_len}")

    def transposed(self) -> "AlignmentMatrix":
        return AlignmentMatrix(self.tgt_len, self.src_len, frozenset((j, i) for i, j in self.links))

    def to_text(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in sorted(self.links))

    @classmethod
    def from_text(cls, line: str, src_len: int, tgt_len: int) -> "AlignmentMatrix":
        links = set()
        for tok in line.split():
            i, _, j = tok.partition("-")
            links.add((int(i), int(j)))
        return cls(src_len, tgt_len, frozenset(links))


@dataclass
class LexicalTable:
    """t(gen | cond) as nested dicts; ``table[cond][gen]``."""

    table: dict[str, dict[str, float]] = field(default_factory=dict)

    def prob(self, gen: str, cond: str) -> float:
        return self.table.get(cond, {}).get(gen, 0.0)

    def row_sums(self) -> dict[str, float]:
        return {c: sum(row.values()) for c, row in self.table.items()}

    def save(self, path, cond_is_source: bool = True) -> None:
        """Write ``source_word target_word probability`` lines."""
        lines = []
        for cond in sorted(self.table):
            for gen in sorted(self.table[cond]):
                p = self.table[cond][gen]
                src, tgt = (cond, gen) if cond_is_source else (gen, cond)
                lines.append(f"{src} {tgt} {p:.7g}\n")
        if not cond_is_source:
            lines.sort()
        with open(path, "w", encoding="utf-8") as fh:
            fh.writelines(lines)

    @classmethod
    def load(cls, path, cond_is_source: bool = True) -> "LexicalTable":
        table: dict[str, dict[str, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'source target probability'")
                src, tgt, p = parts[0], parts[1], float(parts[2])
                cond, gen = (src, tgt) if cond_is_source else (tgt, src)
                table.setdefault(cond, {})[gen] = p
        return cls(table)


@dataclass
class DistortionTable:
    """a(i | j, cond_len, gen_len); i = -1 stands for NULL."""

    table: dict[tuple[int, int, int, int], float] = field(default_factory=dict)

    def prob(self, i: int, j: int, cond_len: int, gen_len: int) -> float:
        p = self.table.get((i, j, cond_len, gen_len))
        if p is None:
            return 1.0 / (cond_len + 1)
        return p


@dataclass
class AlignmentModel:
    lexical: LexicalTable
    distortion: DistortionTable | None = None
    log_likelihoods: list[float] = field(default_factory=list)


class _FlatCorpus:
    """CSR layout of a corpus for the EM kernels."""

    def __init__(self, pairs: Sequence[Pair], with_positions: bool):
        self.cond_ids: dict[str, int] = {NULL: 0}
        self.gen_ids: dict[str, int] = {}
        param_of: dict[tuple[int, int], int] = {}
        pos_of: dict[tuple[int, int, int, int], int] = {}
        row_lengths = []
        t_idx = []
        a_idx = []
        const = 0.0
        for cond, gen in pairs:
            c_ids = [0] + [self.cond_ids.setdefault(w, len(self.cond_ids)) for w in cond]
            l, m = len(cond), len(gen)
            const += m * math.log(l + 1)
            for j, w in enumerate(gen):
                g = self.gen_ids.setdefault(w, len(self.gen_ids))
                row_lengths.append(l + 1)
                for i, c in enumerate(c_ids):
                    t_idx.append(param_of.setdefault((c, g), len(param_of)))
                    if with_positions:
                        a_idx.append(pos_of.setdefault((i - 1, j, l, m), len(pos_of)))
                    else:
                        a_idx.append(0)
        self.row_ptr = np.zeros(len(row_lengths) + 1, dtype=np.int64)
        np.cumsum(row_lengths, out=self.row_ptr[1:])
        self.t_idx = np.asarray(t_idx, dtype=np.int64)
        self.a_idx = np.asarray(a_idx, dtype=np.int64)
        self.params = list(param_of)
        self.positions = list(pos_of)
        self.param_cond = np.fromiter((c for c, _ in self.params), dtype=np.int64, count=len(self.params))
        self.position_group = _group_ids([(j, l, m) for _, j, l, m in self.positions])
        self.model1_const = const

    def uniform_t(self) -> np.ndarray:
        per_cond = np.bincount(self.param_cond, minlength=len(self.cond_ids)).astype(float)
        return 1.0 / per_cond[self.param_cond]

    def uniform_a(self) -> np.ndarray:
        return np.fromiter(
            (1.0 / (l + 1) for _, _, l, _ in self.positions), dtype=float, count=len(self.positions)
        )

    def t_from_table(self, lex: LexicalTable) -> np.ndarray:
        cond_words = _inverse(self.cond_ids)
        gen_words = _inverse(self.gen_ids)
        t = np.array([lex.prob(gen_words[g], cond_words[c]) for c, g in self.params])
        t = np.maximum(t, PROB_FLOOR)
        return _normalize(t, self.param_cond)

    def to_lexical(self, t: np.ndarray) -> LexicalTable:
        cond_words = _inverse(self.cond_ids)
        gen_words = _inverse(self.gen_ids)
        table: dict[str, dict[str, float]] = {}
        for (c, g), p in zip(self.params, t.tolist()):
            table.setdefault(cond_words[c], {})[gen_words[g]] = p
        return LexicalTable(table)

    def to_distortion(self, a: np.ndarray) -> DistortionTable:
        return DistortionTable(dict(zip(self.positions, a.tolist())))


def _inverse(ids: dict[str, int]) -> list[str]:
    out = [""] * len(ids)
    for w, i in ids.items():
        out[i] = w
    return out


def _group_ids(keys: list) -> np.ndarray:
    seen: dict = {}
    return np.fromiter((seen.setdefault(k, len(seen)) for k in keys), dtype=np.int64, count=len(keys))


def _normalize(values: np.ndarray, groups: np.ndarray) -> np.ndarray:
    totals = np.bincount(groups, weights=values)
    return values / totals[groups]


def _m_step(counts: np.ndarray, groups: np.ndarray) -> np.ndarray:
    p = _normalize(counts, groups)
    return _normalize(np.maximum(p, PROB_FLOOR), groups)


def _check(pairs: Sequence[Pair], iterations: int) -> None:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if len(pairs) == 0:
        raise ValueError("cannot train alignments on an empty corpus")


def train_ibm1(pairs: Sequence[Pair], iterations: int = 5) -> AlignmentModel:
    """EM for IBM Model 1 from a uniform start over co-occurring word pairs.

    ``log_likelihoods`` holds the corpus log-likelihood of the starting
    parameters and after every iteration (iterations + 1 values).
    """
    _check(pairs, iterations)
    flat = _FlatCorpus(pairs, with_positions=False)
    one = np.ones(1)
    t = flat.uniform_t()
    history = []
    for it in range(iterations):
        counts, _, ll = kernels.e_step(flat.row_ptr, flat.t_idx, flat.a_idx, t, one)
        history.append(ll - flat.model1_const)
        t = _m_step(counts, flat.param_cond)
        log.debug("ibm1 iteration %d loglik %.6f", it + 1, history[-1])
    _, _, ll = kernels.e_step(flat.row_ptr, flat.t_idx, flat.a_idx, t, one)
    history.append(ll - flat.model1_const)
    return AlignmentModel(flat.to_lexical(t), None, history)


def train_ibm2(pairs: Sequence[Pair], iterations: int = 5, init: LexicalTable | None = None) -> AlignmentModel:
    """Joint EM over t and the position table a(i | j, l, m).

    ``init`` is normally a converged Model 1 table; without it t starts
    uniform over co-occurring pairs.  Positions always start uniform.
    """
    _check(pairs, iterations)
    flat = _FlatCorpus(pairs, with_positions=True)
    t = flat.uniform_t() if init is None else flat.t_from_table(init)
    a = flat.uniform_a()
    history = []
    for it in range(iterations):
        t_counts, a_counts, ll = kernels.e_step(flat.row_ptr, flat.t_idx, flat.a_idx, t, a)
        history.append(ll)
        t = _m_step(t_counts, flat.param_cond)
        a = _m_step(a_counts, flat.position_group)
        log.debug("ibm2 iteration %d loglik %.6f", it + 1, ll)
    _, _, ll = kernels.e_step(flat.row_ptr, flat.t_idx, flat.a_idx, t, a)
    history.append(ll)
    return AlignmentModel(flat.to_lexical(t), flat.to_distortion(a), history)


def viterbi_align(model: AlignmentModel, cond: Sequence[str], gen: Sequence[str]) -> AlignmentMatrix:
    """Best conditioning position per generated word; NULL wins ties and emits no link.

    Links are ``(cond_position, gen_position)``.
    """
    l, m = len(cond), len(gen)
    links = set()
    for j, w in enumerate(gen):
        best, arg = -1.0, -1
        for i, c in enumerate([NULL, *cond]):
            p = model.lexical.prob(w, c)
            if model.distortion is not None:
                p *= model.distortion.prob(i - 1, j, l, m)
            if p > best:
                best, arg = p, i - 1
        if arg >= 0:
            links.add((arg, j))
    return AlignmentMatrix(l, m, frozenset(links))


def align_corpus(model: AlignmentModel, pairs: Sequence[Pair]) -> list[AlignmentMatrix]:
    """Viterbi alignments for a whole corpus through the batched kernel."""
    if not pairs:
        return []
    flat = _FlatCorpus(pairs, with_positions=model.distortion is not None)
    cond_words = _inverse(flat.cond_ids)
    gen_words = _inverse(flat.gen_ids)
    t = np.array([model.lexical.prob(gen_words[g], cond_words[c]) for c, g in flat.params])
    if model.distortion is not None:
        a = np.array([model.distortion.prob(*key) for key in flat.positions])
    else:
        a = np.ones(1)
    best = kernels.viterbi_links(flat.row_ptr, flat.t_idx, flat.a_idx, t, a)
    out = []
    row = 0
    for cond, gen in pairs:
        links = set()
        for j in range(len(gen)):
            if best[row] > 0:
                links.add((int(best[row]) - 1, j))
            row += 1
        out.append(AlignmentMatrix(len(cond), len(gen), frozenset(links)))
    return out


# -- symmetrization ---------------------------------------------------------

_NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def symmetrize(fwd: AlignmentMatrix, rev: AlignmentMatrix, heuristic: str = "grow-diag-final-and") -> AlignmentMatrix:
    """Combine two alignments of the same pair, both as (source, target) links."""
    heuristic = HEURISTIC_ALIASES.get(heuristic, heuristic)
    if (fwd.src_len, fwd.tgt_len) != (rev.src_len, rev.tgt_len):
        raise ValueError(
            f"alignment shapes differ: {fwd.src_len}x{fwd.tgt_len} vs {rev.src_len}x{rev.tgt_len}"
        )
    inter = fwd.links & rev.links
    union = fwd.links | rev.links
    if heuristic == "intersection":
        return AlignmentMatrix(fwd.src_len, fwd.tgt_len, inter)
    if heuristic == "union":
        return AlignmentMatrix(fwd.src_len, fwd.tgt_len, union)
    if heuristic != "grow-diag-final-and":
        raise ValueError(f"unknown symmetrization heuristic {heuristic!r}")

    n, m = fwd.src_len, fwd.tgt_len
    current = set(inter)
    src_covered = {i for i, _ in current}
    tgt_covered = {j for _, j in current}

    added = True
    while added:
        added = False
        for i in range(n):
            for j in range(m):
                if (i, j) not in current:
                    continue
                for di, dj in _NEIGHBOURS:
                    p = (i + di, j + dj)
                    if p in union and p not in current and (
                        p[0] not in src_covered or p[1] not in tgt_covered
                    ):
                        current.add(p)
                        src_covered.add(p[0])
                        tgt_covered.add(p[1])
                        added = True

    for i in range(n):
        for j in range(m):
            if (i, j) in union and i not in src_covered and j not in tgt_covered:
                current.add((i, j))
                src_covered.add(i)
                tgt_covered.add(j)
    return AlignmentMatrix(n, m, frozenset(current))


# -- corpus-level driver and files ------------------------------------------


@dataclass
class TrainedAlignment:
    forward: AlignmentModel
    reverse: AlignmentModel
    forward_links: list[AlignmentMatrix]
    reverse_links: list[AlignmentMatrix]
    symmetrized: list[AlignmentMatrix]


def train_alignment(
    pairs: Sequence[Pair],
    iterations_m1: int = 5,
    iterations_m2: int = 5,
    heuristic: str = "grow-diag-final-and",
) -> TrainedAlignment:
    """Model 1 then Model 2 in both directions, then symmetrize per pair."""
    models = []
    for direction in (pairs, [(t, s) for s, t in pairs]):
        m = train_ibm1(direction, iterations_m1)
        if iterations_m2 > 0:
            m2 = train_ibm2(direction, iterations_m2, init=m.lexical)
            m = AlignmentModel(m2.lexical, m2.distortion, m.log_likelihoods + m2.log_likelihoods)
        models.append(m)
    fwd_model, rev_model = models
    fwd = align_corpus(fwd_model, pairs)
    rev = [a.transposed() for a in align_corpus(rev_model, [(t, s) for s, t in pairs])]
    sym = [symmetrize(f, r, heuristic) for f, r in zip(fwd, rev)]
    return TrainedAlignment(fwd_model, rev_model, fwd, rev, sym)


def write_alignments(path, alignments: Iterable[AlignmentMatrix]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in alignments:
            fh.write(a.to_text() + "\n")


def read_alignments(path, pairs: Sequence[Pair]) -> list[AlignmentMatrix]:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if len(lines) != len(pairs):
        raise ValueError(f"{path}: {len(lines)} alignment lines for {len(pairs)} sentence pairs")
    return [AlignmentMatrix.from_text(line, len(s), len(t)) for line, (s, t) in zip(lines, pairs)]


def save_aligned_dir(out_dir, pairs: Sequence[Pair], trained: TrainedAlignment) -> None:
    """Write the aligned-directory layout consumed by extraction and reordering."""
    from phrasemt.corpus_prep import write_tokenized

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tokenized(out / "corpus.src", (s for s, _ in pairs))
    write_tokenized(out / "corpus.tgt", (t for _, t in pairs))
    write_alignments(out / "align.fwd", trained.forward_links)
    write_alignments(out / "align.rev", trained.reverse_links)
    write_alignments(out / "aligned.txt", trained.symmetrized)
    trained.forward.lexical.save(out / "lex.f2e", cond_is_source=True)
    trained.reverse.lexical.save(out / "lex.e2f", cond_is_source=False)
