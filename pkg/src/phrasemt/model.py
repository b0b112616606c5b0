"""Feature layout, weight files and the on-disk translation model bundle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from phrasemt.aligner import LexicalTable
from phrasemt.binary_table import BinaryTable
from phrasemt.corpus_prep import TruecaseModel
from phrasemt.language_model import NGramLanguageModel, import_arpa
from phrasemt.phrase_model import PhraseTable, read_phrase_table
from phrasemt.reordering import BinaryReorderingTable, ReorderingTable, read_reordering_rows

FEATURE_NAMES = (
    "lm",
    "phi_f_given_e",
    "lex_f_given_e",
    "phi_e_given_f",
    "lex_e_given_f",
    "phrase_penalty",
    "word_penalty",
    "distortion",
    "fwd_mono",
    "fwd_swap",
    "fwd_disc",
    "bwd_mono",
    "bwd_swap",
    "bwd_disc",
)
N_FEATURES = len(FEATURE_NAMES)

LM = 0
TM = slice(1, 5)
PHRASE_PENALTY = 5
WORD_PENALTY = 6
DISTORTION = 7
FWD = 8
BWD = 11

MODEL_VERSION = 1

DEFAULT_CONFIG = {
    "version": str(MODEL_VERSION),
    "stack_size": "100",
    "distortion_limit": "6",
    "nbest_size": "100",
    "ttable_limit": "20",
    "oov_penalty": "-10",
    "case": "lowercase",
}


def uniform_weights() -> np.ndarray:
    """Unit weights, negative on the count-valued penalty features."""
    w = np.ones(N_FEATURES)
    w[[PHRASE_PENALTY, WORD_PENALTY, DISTORTION]] = -1.0
    return w


def score_features(features, weights) -> float:
    features = np.asarray(features, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if features.shape != weights.shape:
        raise ValueError(f"dimension mismatch: {features.shape} vs {weights.shape}")
    return float(features @ weights)


def save_weights(path, weights) -> None:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (N_FEATURES,):
        raise ValueError(f"expected {N_FEATURES} weights, got {weights.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dimension {N_FEATURES}\n")
        for name, v in zip(FEATURE_NAMES, weights.tolist()):
            fh.write(f"{name} {v!r}\n")


def load_weights(path) -> np.ndarray:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'feature_name value'")
            if parts[0] not in FEATURE_NAMES:
                raise ValueError(f"{path}:{lineno}: unknown feature {parts[0]!r}")
            v = float(parts[1])
            if not math.isfinite(v):
                raise ValueError(f"{path}:{lineno}: weight must be finite")
            values[parts[0]] = v
    missing = [n for n in FEATURE_NAMES if n not in values]
    if missing:
        raise ValueError(f"{path}: missing weights for {', '.join(missing)}")
    return np.array([values[n] for n in FEATURE_NAMES])


def read_config(path) -> dict[str, str]:
    config = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            config[key.strip()] = value.strip()
    return config


def write_config(path, config: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(config):
            fh.write(f"{key}={config[key]}\n")


@dataclass
class TranslationModel:
    lm: NGramLanguageModel
    phrase_table: PhraseTable | BinaryTable
    reordering: ReorderingTable
    weights: np.ndarray
    lex_f2e: LexicalTable | None = None
    lex_e2f: LexicalTable | None = None
    truecase_src: TruecaseModel | None = None
    truecase_tgt: TruecaseModel | None = None
    config: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CONFIG))

    def setting(self, key: str, cast=int):
        return cast(self.config.get(key, DEFAULT_CONFIG[key]))

    def with_weights(self, weights) -> "TranslationModel":
        clone = TranslationModel(**{**self.__dict__})
        clone.weights = np.asarray(weights, dtype=float)
        return clone


def load_model(model_dir, prefer_binary: bool = True) -> TranslationModel:
    """Load every component of a model directory."""
    d = Path(model_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"model directory {d} does not exist")
    config = dict(DEFAULT_CONFIG)
    if (d / "config.txt").exists():
        config.update(read_config(d / "config.txt"))
    if int(config["version"]) != MODEL_VERSION:
        raise ValueError(f"{d}: model version {config['version']} is not {MODEL_VERSION}")

    if prefer_binary and (d / "phrase-table.bin").exists():
        phrase_table = BinaryTable(d / "phrase-table.bin")
    else:
        phrase_table = read_phrase_table(d / "phrase-table.txt")
    if prefer_binary and (d / "reordering-table.bin").exists():
        reordering = BinaryReorderingTable(BinaryTable(d / "reordering-table.bin"))
    elif (d / "reordering-table.txt").exists():
        reordering = ReorderingTable(read_reordering_rows(d / "reordering-table.txt"))
    else:
        reordering = ReorderingTable()

    def optional(name, loader):
        p = d / name
        return loader(p) if p.exists() else None

    return TranslationModel(
        lm=import_arpa(d / "lm.arpa"),
        phrase_table=phrase_table,
        reordering=reordering,
        weights=load_weights(d / "weights.txt") if (d / "weights.txt").exists() else uniform_weights(),
        lex_f2e=optional("lex.f2e", lambda p: LexicalTable.load(p, cond_is_source=True)),
        lex_e2f=optional("lex.e2f", lambda p: LexicalTable.load(p, cond_is_source=False)),
        truecase_src=optional("truecase.src", TruecaseModel.load),
        truecase_tgt=optional("truecase.tgt", TruecaseModel.load),
        config=config,
    )
