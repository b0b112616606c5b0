import random

import numpy as np
import pytest
from hypothesis import settings

from phrasemt.aligner import train_alignment
from phrasemt.corpus_prep import prepare_corpus, read_lines
from phrasemt.language_model import train_lm
from phrasemt.model import TranslationModel, uniform_weights
from phrasemt.phrase_model import PhraseTable, PhraseTableEntry, extract_corpus, score_phrases
from phrasemt.reordering import ReorderingTable, train_reordering
from phrasemt.toy import toy_data_dir

# JIT compilation and model training make first-call timings meaningless
settings.register_profile("phrasemt", deadline=None)
settings.load_profile("phrasemt")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")


def build_toy_model(pairs, order=3):
    lm = train_lm([t for _, t in pairs], order)
    trained = train_alignment(pairs)
    per_sentence = extract_corpus(pairs, trained.symmetrized)
    entries = score_phrases([p for s in per_sentence for p in s], trained.forward.lexical, trained.reverse.lexical)
    reo = train_reordering(per_sentence, [(len(s), len(t)) for s, t in pairs])
    return TranslationModel(
        lm=lm,
        phrase_table=PhraseTable.from_entries(entries),
        reordering=ReorderingTable([(e.src, e.tgt, e.scores) for e in reo]),
        weights=uniform_weights(),
        lex_f2e=trained.forward.lexical,
        lex_e2f=trained.reverse.lexical,
    )


@pytest.fixture(scope="session")
def toy_dir():
    return toy_data_dir()


@pytest.fixture(scope="session")
def toy_train(toy_dir):
    return prepare_corpus(read_lines(toy_dir / "train.en"), read_lines(toy_dir / "train.ar")).pairs


@pytest.fixture(scope="session")
def toy_dev(toy_dir):
    return prepare_corpus(read_lines(toy_dir / "dev.en"), read_lines(toy_dir / "dev.ar")).pairs


@pytest.fixture(scope="session")
def toy_test(toy_dir):
    return prepare_corpus(read_lines(toy_dir / "test.en"), read_lines(toy_dir / "test.ar")).pairs


@pytest.fixture(scope="session")
def toy_model(toy_train):
    return build_toy_model(toy_train)


def random_decoder_model(seed, n_entries=50, src_vocab=8, tgt_vocab=10, order=2):
    """A small random model: every source word has a single-word entry."""
    rng = random.Random(seed)
    src_words = [f"s{k}" for k in range(src_vocab)]
    tgt_words = [f"t{k}" for k in range(tgt_vocab)]
    rows = {}
    for w in src_words:
        for _ in range(2):
            rows[((w,), (rng.choice(tgt_words),))] = None
    while len(rows) < n_entries:
        length = rng.choice((1, 2, 2, 3))
        src = tuple(rng.choice(src_words) for _ in range(length))
        tgt = tuple(rng.choice(tgt_words) for _ in range(rng.randint(1, 3)))
        rows[(src, tgt)] = None
    entries = [
        PhraseTableEntry(s, t, tuple(rng.uniform(0.05, 1.0) for _ in range(4))) for s, t in sorted(rows)
    ]
    reo_rows = []
    for e in entries:
        tri = [rng.uniform(0.1, 1.0) for _ in range(6)]
        fwd = [x / sum(tri[:3]) for x in tri[:3]]
        bwd = [x / sum(tri[3:]) for x in tri[3:]]
        reo_rows.append((e.src, e.tgt, tuple(fwd + bwd)))
    lm_corpus = [[rng.choice(tgt_words) for _ in range(rng.randint(1, 6))] for _ in range(40)]
    weights = np.array([rng.uniform(-1, 1) for _ in range(14)])
    weights[0] = abs(weights[0]) + 0.1
    return TranslationModel(
        lm=train_lm(lm_corpus, order),
        phrase_table=PhraseTable.from_entries(entries),
        reordering=ReorderingTable(reo_rows),
        weights=weights,
    ), src_words
