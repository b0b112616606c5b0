"""Synthetic English -> transliterated-Arabic parallel corpus for desk-scale runs.

The target side follows verb-subject-object order, puts adjectives after
nouns and folds the definite article into the noun ("the boy" ->
"al-walad"), so the data exercises one-to-many alignments, unaligned
words and phrase reordering.
"""
from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

PERSONS = {
    "boy": "walad", "girl": "bint", "man": "rajul", "woman": "imraa",
    "teacher": "muallim", "student": "talib", "doctor": "tabib", "child": "tifl",
}
THINGS = {
    "book": "kitab", "ball": "kura", "apple": "tuffaha", "letter": "risala",
    "car": "sayyara", "door": "bab", "house": "bayt", "pen": "qalam", "window": "nafidha",
}
ADJECTIVES = {
    "big": "kabir", "small": "saghir", "new": "jadid", "old": "qadim", "red": "ahmar",
    "beautiful": "jamil",
}
VERBS = {
    "reads": "yaqra", "plays": "yalab", "eats": "yakul", "writes": "yaktub", "sees": "yara",
    "opens": "yaftah", "likes": "yuhibb", "buys": "yashtari", "carries": "yahmil",
}
INTRANSITIVE = {"sleeps": "yanam", "runs": "yarkud", "sits": "yajlis", "laughs": "yadhak"}
PLACES = {
    "house": "bayt", "garden": "hadiqa", "school": "madrasa", "market": "suq", "street": "shari",
}

TOY_FILES = ("train.en", "train.ar", "dev.en", "dev.ar", "test.en", "test.ar")


def _noun_phrase(rng: random.Random, lexicon: dict[str, str]) -> tuple[list[str], list[str]]:
    noun = rng.choice(sorted(lexicon))
    definite = rng.random() < 0.7
    adj = rng.choice(sorted(ADJECTIVES)) if rng.random() < 0.3 else None
    src = ["the" if definite else "a"] + ([adj] if adj else []) + [noun]
    prefix = "al-" if definite else ""
    tgt = [prefix + lexicon[noun]] + ([prefix + ADJECTIVES[adj]] if adj else [])
    return src, tgt


def generate_pair(rng: random.Random) -> tuple[str, str]:
    subj_s, subj_t = _noun_phrase(rng, PERSONS)
    if rng.random() < 0.25:
        verb = rng.choice(sorted(INTRANSITIVE))
        src = subj_s + [verb]
        tgt = [INTRANSITIVE[verb]] + subj_t
    else:
        verb = rng.choice(sorted(VERBS))
        obj_s, obj_t = _noun_phrase(rng, THINGS)
        src = subj_s + [verb] + obj_s
        tgt = [VERBS[verb]] + subj_t + obj_t
    if rng.random() < 0.2:
        place = rng.choice(sorted(PLACES))
        src += ["in", "the", place]
        tgt += ["fi", "al-" + PLACES[place]]
    # varied final punctuation keeps "." from being confounded with NULL
    mark = "!" if rng.random() < 0.2 else "."
    src_line = " ".join(src).capitalize() + mark
    tgt_line = " ".join(tgt).capitalize() + mark
    return src_line, tgt_line


def generate_corpus(n: int, seed: int = 0) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    return [generate_pair(rng) for _ in range(n)]


def write_toy_data(out_dir, n_train: int = 500, n_dev: int = 50, n_test: int = 50) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, n, seed in (("train", n_train, 1), ("dev", n_dev, 2), ("test", n_test, 3)):
        pairs = generate_corpus(n, seed)
        (out / f"{name}.en").write_text("".join(s + "\n" for s, _ in pairs), encoding="utf-8")
        (out / f"{name}.ar").write_text("".join(t + "\n" for _, t in pairs), encoding="utf-8")


def toy_data_dir() -> Path:
    """Directory of the bundled toy corpus files."""
    return Path(str(resources.files("phrasemt") / "data" / "toy"))


if __name__ == "__main__":
    import sys

    write_toy_data(sys.argv[1] if len(sys.argv) > 1 else toy_data_dir())
