"""Resumable end-to-end training over a file-based model directory.

The training run is a fixed sequence of steps numbered 2 to 15.  Each step
writes a known set of files and the manifest records a checksum of them, so
a rerun skips every step whose outputs are intact and resumes at the first
one that is missing or stale.  Steps that only compute in memory are paired
with the step that saves their result; when the saved files are bad the run
restarts at the computing step.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import logging
import os
import shutil
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, TextIO

from phrasemt import aligner, corpus_prep, language_model, phrase_model, reordering
from phrasemt.decoder import DecodeResult, translate
from phrasemt.model import (
    MODEL_VERSION,
    TranslationModel,
    load_model,
    load_weights,
    save_weights,
    uniform_weights,
    write_config,
)

log = logging.getLogger(__name__)

MANIFEST = "manifest.txt"
LOCK = ".lock"
WORK = "work"


class PipelineError(RuntimeError):
    """A step failed; ``step`` names it."""

    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause


class LockedError(RuntimeError):
    pass


# -- configuration ------------------------------------------------------------


@dataclass
class PipelineConfig:
    src: str = ""
    tgt: str = ""
    model_dir: str = "model"
    dev_src: str = ""
    dev_ref: str = ""
    case: str = "lowercase"
    max_len: int = corpus_prep.DEFAULT_MAX_LEN
    max_ratio: float = corpus_prep.DEFAULT_MAX_RATIO
    lm_order: int = language_model.DEFAULT_ORDER
    smoothing: str = "witten-bell"
    iterations_m1: int = 5
    iterations_m2: int = 5
    sym: str = "grow-diag-final-and"
    max_phrase_len: int = phrase_model.DEFAULT_MAX_PHRASE_LEN
    sigma: float = reordering.DEFAULT_SIGMA
    stack_size: int = 100
    distortion_limit: int = 6
    nbest_size: int = 100
    ttable_limit: int = 20
    tune: bool = False
    tune_iterations: int = 10
    tune_nbest: int = 100
    restarts: int = 8
    seed: int = 42

    PATH_KEYS = ("src", "tgt", "dev_src", "dev_ref")

    @classmethod
    def from_dict(cls, values: dict[str, str], base_dir=None) -> "PipelineConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(known[name].type, raw, key)
        cfg = cls(**kwargs)
        if base_dir is not None:
            for name in cls.PATH_KEYS + ("model_dir",):
                v = getattr(cfg, name)
                if v and not Path(v).is_absolute():
                    setattr(cfg, name, str(Path(base_dir) / v))
        return cfg

    @classmethod
    def load(cls, path, overrides: dict[str, str] | None = None) -> "PipelineConfig":
        values = parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
        values.update(overrides or {})
        return cls.from_dict(values, base_dir=Path(path).parent)

    def validate(self) -> None:
        if not self.src or not self.tgt:
            raise ValueError("config needs both 'src' and 'tgt'")
        for name in self.PATH_KEYS:
            v = getattr(self, name)
            if v and not Path(v).is_file():
                raise FileNotFoundError(f"{name} = {v} does not exist")
        if self.tune and not (self.dev_src and self.dev_ref):
            raise ValueError("tune = true needs 'dev_src' and 'dev_ref'")
        if self.case not in corpus_prep.CASE_POLICIES:
            raise ValueError(f"unknown case policy {self.case!r}")

    def model_config(self) -> dict[str, str]:
        return {
            "version": str(MODEL_VERSION),
            "case": self.case,
            "stack_size": str(self.stack_size),
            "distortion_limit": str(self.distortion_limit),
            "nbest_size": str(self.nbest_size),
            "ttable_limit": str(self.ttable_limit),
            "oov_penalty": "-10",
        }


def _coerce(kind, raw: str, key: str):
    kind = kind if isinstance(kind, str) else kind.__name__
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot read {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, where: str = "<config>") -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{where}:{lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


# -- manifest -------------------------------------------------------------------


def checksum(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        h.update(p.name.encode("utf-8") + b"\0")
        h.update(p.read_bytes())
        h.update(b"\0")
    return h.hexdigest()[:16]


@dataclass
class ModelManifest:
    """Completed steps in pipeline order, with output checksums and finish times."""

    done: dict[str, str] = field(default_factory=dict)
    finished: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "ModelManifest":
        m = cls()
        p = Path(path)
        if not p.exists():
            return m
        for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
            if line.startswith("# finished "):
                parts = line.split()
                if len(parts) == 4:
                    m.finished[parts[2]] = parts[3]
                continue
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] != "DONE":
                raise ValueError(f"{p}:{lineno}: expected 'step_name DONE checksum'")
            m.done[parts[0]] = parts[2]
        names = [s.name for s in STEPS]
        flags = [n in m.done for n in names]
        if any(flags[k] and not all(flags[:k]) for k in range(len(flags))):
            raise ValueError(f"{p}: completed steps are not a prefix of the pipeline")
        return m

    def save(self, path) -> None:
        lines = []
        for step in STEPS:
            if step.name in self.done:
                lines.append(f"{step.name} DONE {self.done[step.name]}")
        for step in STEPS:
            if step.name in self.finished and step.name in self.done:
                lines.append(f"# finished {step.name} {self.finished[step.name]}")
        tmp = Path(str(path) + ".tmp")
        tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        os.replace(tmp, path)

    def complete_through(self, number: int) -> bool:
        return all(s.name in self.done for s in STEPS if s.number <= number)


# -- steps ----------------------------------------------------------------------


@dataclass
class RunContext:
    config: PipelineConfig
    model_dir: Path
    memory: dict = field(default_factory=dict)

    @property
    def work(self) -> Path:
        return self.model_dir / WORK

    def pairs(self):
        src = corpus_prep.read_tokenized(self.work / "corpus.src")
        tgt = corpus_prep.read_tokenized(self.work / "corpus.tgt")
        return list(zip(src, tgt))


@dataclass(frozen=True)
class Step:
    number: int
    name: str
    run: Callable[[RunContext], None]
    outputs: tuple[str, ...] = ()
    # index into STEPS of the step whose in-memory result this one saves
    producer: int | None = None


def _prepare(ctx: RunContext) -> None:
    cfg = ctx.config
    prepared = corpus_prep.prepare_corpus(
        corpus_prep.read_lines(cfg.src),
        corpus_prep.read_lines(cfg.tgt),
        case=cfg.case,
        max_len=cfg.max_len,
        max_ratio=cfg.max_ratio,
    )
    if not prepared.pairs:
        raise ValueError("no sentence pairs survived cleaning")
    corpus_prep.write_tokenized(ctx.work / "corpus.src", (s for s, _ in prepared.pairs))
    corpus_prep.write_tokenized(ctx.work / "corpus.tgt", (t for _, t in prepared.pairs))
    prepared.truecase_src.save(ctx.model_dir / "truecase.src")
    prepared.truecase_tgt.save(ctx.model_dir / "truecase.tgt")


def _train_lm(ctx: RunContext) -> None:
    cfg = ctx.config
    lm = language_model.train_lm([t for _, t in ctx.pairs()], cfg.lm_order, cfg.smoothing)
    language_model.export_arpa(lm, ctx.model_dir / "lm.arpa")


def _train_align(ctx: RunContext) -> None:
    cfg = ctx.config
    pairs = ctx.pairs()
    ctx.memory["pairs"] = pairs
    ctx.memory["alignment"] = aligner.train_alignment(pairs, cfg.iterations_m1, cfg.iterations_m2, cfg.sym)


def _save_alignment(ctx: RunContext) -> None:
    aligner.save_aligned_dir(ctx.work / "aligned", ctx.memory["pairs"], ctx.memory["alignment"])


def _build_lex(ctx: RunContext) -> None:
    aligned = ctx.work / "aligned"
    ctx.memory["lex_f2e"] = aligner.LexicalTable.load(aligned / "lex.f2e", cond_is_source=True)
    ctx.memory["lex_e2f"] = aligner.LexicalTable.load(aligned / "lex.e2f", cond_is_source=False)


def _save_lex(ctx: RunContext) -> None:
    ctx.memory["lex_f2e"].save(ctx.model_dir / "lex.f2e", cond_is_source=True)
    ctx.memory["lex_e2f"].save(ctx.model_dir / "lex.e2f", cond_is_source=False)


def _aligned_phrases(ctx: RunContext):
    aligned = ctx.work / "aligned"
    src = corpus_prep.read_tokenized(aligned / "corpus.src")
    tgt = corpus_prep.read_tokenized(aligned / "corpus.tgt")
    pairs = list(zip(src, tgt))
    links = aligner.read_alignments(aligned / "aligned.txt", pairs)
    return pairs, phrase_model.extract_corpus(pairs, links, ctx.config.max_phrase_len)


def _extract(ctx: RunContext) -> None:
    _, per_sentence = _aligned_phrases(ctx)
    lex_f2e = aligner.LexicalTable.load(ctx.model_dir / "lex.f2e", cond_is_source=True)
    lex_e2f = aligner.LexicalTable.load(ctx.model_dir / "lex.e2f", cond_is_source=False)
    ctx.memory["phrases"] = phrase_model.score_phrases(
        [p for sent in per_sentence for p in sent], lex_f2e, lex_e2f
    )


def _save_phrases(ctx: RunContext) -> None:
    phrase_model.save_phrase_table(ctx.model_dir / "phrase-table.txt", ctx.memory["phrases"])


def _train_reordering(ctx: RunContext) -> None:
    pairs, per_sentence = _aligned_phrases(ctx)
    lengths = [(len(s), len(t)) for s, t in pairs]
    ctx.memory["reordering"] = reordering.train_reordering(per_sentence, lengths, ctx.config.sigma)


def _save_reordering(ctx: RunContext) -> None:
    reordering.save_reordering_table(ctx.model_dir / "reordering-table.txt", ctx.memory["reordering"])


def _build_model(ctx: RunContext) -> None:
    ctx.memory["model_config"] = ctx.config.model_config()
    ctx.memory["init_weights"] = uniform_weights()


def _save_model(ctx: RunContext) -> None:
    write_config(ctx.model_dir / "config.txt", ctx.memory["model_config"])
    save_weights(ctx.work / "weights.init", ctx.memory["init_weights"])


def _tune(ctx: RunContext) -> None:
    from phrasemt.tuner import tune

    cfg = ctx.config
    init = load_weights(ctx.work / "weights.init")
    trace_path = ctx.model_dir / "tuning-trace.txt"
    if not cfg.tune:
        save_weights(ctx.model_dir / "weights.txt", init)
        if trace_path.exists():
            trace_path.unlink()
        return
    model = load_model(ctx.model_dir, prefer_binary=False).with_weights(init)
    dev_src = [corpus_prep.prepare_sentence(line, cfg.case, model.truecase_src)
               for line in corpus_prep.read_lines(cfg.dev_src)]
    dev_ref = [[corpus_prep.prepare_sentence(line, cfg.case, model.truecase_tgt)]
               for line in corpus_prep.read_lines(cfg.dev_ref)]
    weights, trace = tune(
        model, dev_src, dev_ref, init,
        max_iterations=cfg.tune_iterations, nbest_size=cfg.tune_nbest,
        num_restarts=cfg.restarts, seed=cfg.seed,
    )
    save_weights(ctx.model_dir / "weights.txt", weights)
    trace.write(trace_path)


def _binarise(ctx: RunContext) -> None:
    d = ctx.model_dir
    phrase_model.binarise_phrase_table(
        phrase_model.read_text_rows(d / "phrase-table.txt", phrase_model.N_PHRASE_SCORES),
        d / "phrase-table.bin",
    )
    phrase_model.binarise_phrase_table(
        reordering.read_reordering_rows(d / "reordering-table.txt"),
        d / "reordering-table.bin",
        n_scores=reordering.N_REORDERING_SCORES,
    )


_ALIGNED_FILES = tuple(
    f"{WORK}/aligned/{n}" for n in ("corpus.src", "corpus.tgt", "align.fwd", "align.rev", "aligned.txt", "lex.f2e", "lex.e2f")
)

STEPS: tuple[Step, ...] = (
    Step(2, "prepare", _prepare, (f"{WORK}/corpus.src", f"{WORK}/corpus.tgt", "truecase.src", "truecase.tgt")),
    Step(3, "train-lm", _train_lm, ("lm.arpa",)),
    Step(4, "train-align", _train_align),
    Step(5, "save-alignment", _save_alignment, _ALIGNED_FILES, producer=2),
    Step(6, "build-lexical-table", _build_lex),
    Step(7, "save-lexical-table", _save_lex, ("lex.f2e", "lex.e2f"), producer=4),
    Step(8, "extract-phrases", _extract),
    Step(9, "save-phrase-table", _save_phrases, ("phrase-table.txt",), producer=6),
    Step(10, "train-reordering", _train_reordering),
    Step(11, "save-reordering-table", _save_reordering, ("reordering-table.txt",), producer=8),
    Step(12, "build-model", _build_model),
    Step(13, "save-model", _save_model, ("config.txt", f"{WORK}/weights.init"), producer=10),
    Step(14, "tune", _tune, ("weights.txt",)),
    Step(15, "binarise", _binarise, ("phrase-table.bin", "reordering-table.bin")),
)

# producer steps share the checksum of the files their save step writes
_SAVED_BY = {s.producer: k for k, s in enumerate(STEPS) if s.producer is not None}


def _step_checksum(model_dir: Path, k: int) -> str | None:
    """Checksum of the files behind step ``k``, or None if any is missing."""
    step = STEPS[_SAVED_BY.get(k, k)]
    paths = [model_dir / o for o in step.outputs]
    if not all(p.is_file() for p in paths):
        return None
    return checksum(paths)


def first_stale_step(model_dir, manifest: ModelManifest) -> int:
    """Index into STEPS of the first step that must run (len(STEPS) if none)."""
    model_dir = Path(model_dir)
    for k, step in enumerate(STEPS):
        recorded = manifest.done.get(step.name)
        if recorded is None or recorded != _step_checksum(model_dir, k):
            return step.producer if step.producer is not None else k
    return len(STEPS)


# -- runner -----------------------------------------------------------------------


class _DirLock:
    def __init__(self, model_dir: Path):
        self.path = model_dir / LOCK
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockedError(
                f"{self.path} exists; another run owns this model directory (delete the file if it is stale)"
            ) from None
        os.write(self.fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        os.close(self.fd)
        self.path.unlink(missing_ok=True)


@dataclass
class PipelineResult:
    manifest: ModelManifest
    executed: list[str]


def run_pipeline(config: PipelineConfig, clock=None) -> PipelineResult:
    """Run or resume the training steps; returns the manifest and the steps that ran."""
    config.validate()
    model_dir = Path(config.model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    (model_dir / WORK).mkdir(exist_ok=True)
    clock = clock or (lambda: _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))

    with _DirLock(model_dir):
        manifest_path = model_dir / MANIFEST
        manifest = ModelManifest.load(manifest_path)
        start = first_stale_step(model_dir, manifest)
        # later flags are cleared before anything runs, keeping the flags a prefix
        for step in STEPS[start:]:
            manifest.done.pop(step.name, None)
            manifest.finished.pop(step.name, None)
        manifest.save(manifest_path)

        ctx = RunContext(config, model_dir)
        executed = []
        for k in range(start, len(STEPS)):
            step = STEPS[k]
            log.info("step %d %s", step.number, step.name)
            try:
                step.run(ctx)
            except Exception as exc:
                raise PipelineError(step.name, exc) from exc
            executed.append(step.name)
            if step.outputs:
                manifest.done[step.name] = _step_checksum(model_dir, k)
                if step.producer is not None:
                    producer = STEPS[step.producer].name
                    manifest.done[producer] = manifest.done[step.name]
                manifest.finished[step.name] = clock()
                manifest.save(manifest_path)
            else:
                manifest.finished[step.name] = clock()
    return PipelineResult(manifest, executed)


# -- translation ------------------------------------------------------------------


def translate_line(model: TranslationModel, line: str, nbest_size: int = 1) -> tuple[str, DecodeResult | None]:
    """Translate one raw input line into cased, detokenized text.

    Shared by batch and interactive translation so both print the same text.
    """
    policy = model.setting("case", str)
    tokens = corpus_prep.prepare_sentence(line, policy, model.truecase_src)
    if not tokens:
        return "", None
    result = translate(model, tokens, nbest_size=nbest_size, ttable_limit=model.setting("ttable_limit"))
    words = corpus_prep.restore_case(model.truecase_tgt, result.best)
    return corpus_prep.detokenize(words), result


def format_nbest_line(sentence_id: int, entry) -> str:
    feats = " ".join(f"{v:.6g}" for v in entry.features)
    return f"{sentence_id} ||| {' '.join(entry.tokens)} ||| {feats} ||| {entry.score:.6g}"


def translate_file(
    model: TranslationModel,
    input_path,
    output_path,
    nbest_size: int = 0,
    nbest_path=None,
) -> int:
    lines = corpus_prep.read_lines(input_path)
    nbest_fh = open(nbest_path, "w", encoding="utf-8") if nbest_path else None
    try:
        with open(output_path, "w", encoding="utf-8") as out:
            for sid, line in enumerate(lines):
                text, result = translate_line(model, line, max(nbest_size, 1))
                out.write(text + "\n")
                if nbest_fh is not None and result is not None:
                    for entry in result.nbest[:nbest_size]:
                        nbest_fh.write(format_nbest_line(sid, entry) + "\n")
    finally:
        if nbest_fh is not None:
            nbest_fh.close()
    return len(lines)


def serve_interactive(
    model_dir,
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
    stderr: TextIO | None = None,
    session_log=None,
) -> int:
    """Translate lines from ``stdin`` until EOF; returns the number processed.

    Each processed line is appended to the session log as
    ``source<TAB>translation``.  Decode errors are reported on ``stderr``
    and the session continues.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    model_dir = Path(model_dir)
    manifest = ModelManifest.load(model_dir / MANIFEST)
    if (model_dir / MANIFEST).exists() and not manifest.complete_through(13):
        raise ValueError(f"{model_dir}: model is not packaged yet (manifest incomplete through step 13)")
    model = load_model(model_dir)
    log_path = Path(session_log) if session_log else model_dir / "session.log"
    count = 0
    with open(log_path, "a", encoding="utf-8") as session:
        for raw in stdin:
            line = raw.rstrip("\n").rstrip("\r")
            try:
                text, _ = translate_line(model, line)
            except Exception as exc:  # keep serving after a bad line
                print(f"error: {exc}", file=stderr)
                text = ""
            print(text, file=stdout, flush=True)
            session.write(f"{line}\t{text}\n")
            session.flush()
            count += 1
    return count


def package_model(
    out_dir,
    lm,
    phrase_table,
    reordering_table=None,
    lex_dir=None,
    truecase_dir=None,
    weights=None,
    config: dict[str, str] | None = None,
) -> Path:
    """Copy separately trained components into the model directory layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(lm, out / "lm.arpa")
    shutil.copyfile(phrase_table, out / "phrase-table.txt")
    if reordering_table:
        shutil.copyfile(reordering_table, out / "reordering-table.txt")
    for directory, names in ((lex_dir, ("lex.f2e", "lex.e2f")), (truecase_dir, ("truecase.src", "truecase.tgt"))):
        if directory:
            for name in names:
                if (Path(directory) / name).exists():
                    shutil.copyfile(Path(directory) / name, out / name)
    if weights:
        save_weights(out / "weights.txt", load_weights(weights))
    else:
        save_weights(out / "weights.txt", uniform_weights())
    merged = PipelineConfig().model_config()
    merged.update(config or {})
    write_config(out / "config.txt", merged)
    return out

