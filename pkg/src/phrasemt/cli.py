"""Command-line entry point: ``phrasemt <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

log = logging.getLogger("phrasemt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; route that to our code 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _existing_file(value: str) -> str:
    if not Path(value).is_file():
        raise argparse.ArgumentTypeError(f"{value} is not a file")
    return value


def _existing_dir(value: str) -> str:
    if not Path(value).is_dir():
        raise argparse.ArgumentTypeError(f"{value} is not a directory")
    return value


# -- command implementations ----------------------------------------------------


def cmd_prepare(args) -> int:
    from phrasemt.corpus_prep import prepare_corpus, read_lines, write_prepared

    prepared = prepare_corpus(
        read_lines(args.src), read_lines(args.tgt), case=args.case, max_len=args.max_len, max_ratio=args.max_ratio
    )
    write_prepared(prepared, args.out_dir)
    print(f"kept {len(prepared.pairs)} sentence pairs -> {args.out_dir}")
    return EXIT_OK


def cmd_train_lm(args) -> int:
    from phrasemt.language_model import train_lm_file

    lm = train_lm_file(args.corpus, args.order, args.smoothing, args.out)
    print(f"{args.order}-gram model over {len(lm.vocabulary)} types -> {args.out}")
    return EXIT_OK


def cmd_train_align(args) -> int:
    from phrasemt.aligner import save_aligned_dir, train_alignment
    from phrasemt.corpus_prep import read_tokenized

    src, tgt = read_tokenized(args.src), read_tokenized(args.tgt)
    if len(src) != len(tgt):
        raise ValueError(f"{args.src} and {args.tgt} differ in line count")
    pairs = list(zip(src, tgt))
    trained = train_alignment(pairs, args.iterations_m1, args.iterations_m2, args.sym)
    save_aligned_dir(args.out_dir, pairs, trained)
    print(f"aligned {len(pairs)} sentence pairs -> {args.out_dir}")
    return EXIT_OK


def _aligned_dir(path):
    from phrasemt.aligner import LexicalTable, read_alignments
    from phrasemt.corpus_prep import read_tokenized

    d = Path(path)
    pairs = list(zip(read_tokenized(d / "corpus.src"), read_tokenized(d / "corpus.tgt")))
    links = read_alignments(d / "aligned.txt", pairs)
    lex = (
        LexicalTable.load(d / "lex.f2e", cond_is_source=True),
        LexicalTable.load(d / "lex.e2f", cond_is_source=False),
    )
    return pairs, links, lex


def cmd_extract(args) -> int:
    from phrasemt.phrase_model import extract_corpus, save_phrase_table, score_phrases

    pairs, links, (f2e, e2f) = _aligned_dir(args.aligned)
    per_sentence = extract_corpus(pairs, links, args.max_phrase_len)
    entries = score_phrases([p for s in per_sentence for p in s], f2e, e2f)
    save_phrase_table(args.out, entries)
    print(f"{len(entries)} phrase pairs -> {args.out}")
    return EXIT_OK


def cmd_binarise(args) -> int:
    from phrasemt.phrase_model import binarise_phrase_table, read_text_rows

    with open(args.input, encoding="utf-8") as fh:
        first = fh.readline()
    n_scores = len(first.split(" ||| ")[2].split()) if first.count(" ||| ") >= 2 else 4
    rows = read_text_rows(args.input, n_scores)
    binarise_phrase_table(rows, args.out, n_scores=n_scores)
    print(f"{len(rows)} rows with {n_scores} scores -> {args.out}")
    return EXIT_OK


def cmd_train_reorder(args) -> int:
    from phrasemt.phrase_model import extract_corpus
    from phrasemt.reordering import save_reordering_table, train_reordering

    pairs, links, _ = _aligned_dir(args.aligned)
    per_sentence = extract_corpus(pairs, links, args.max_phrase_len)
    entries = train_reordering(per_sentence, [(len(s), len(t)) for s, t in pairs], args.sigma)
    save_reordering_table(args.out, entries)
    print(f"{len(entries)} reordering entries -> {args.out}")
    return EXIT_OK


def cmd_package_model(args) -> int:
    from phrasemt.pipeline import package_model

    out = package_model(
        args.out, args.lm, args.phrase_table, args.reordering_table,
        lex_dir=args.lex_dir, truecase_dir=args.truecase_dir, weights=args.weights,
        config={"case": args.case},
    )
    print(f"model -> {out}")
    return EXIT_OK


def cmd_tune(args) -> int:
    from phrasemt.corpus_prep import prepare_sentence, read_lines
    from phrasemt.model import load_model, save_weights
    from phrasemt.tuner import tune

    model = load_model(args.model)
    case = model.setting("case", str)
    src_lines, ref_lines = read_lines(args.dev_src), read_lines(args.dev_ref)
    if len(src_lines) != len(ref_lines):
        raise ValueError("development source and reference files differ in line count")
    dev_src = [prepare_sentence(x, case, model.truecase_src) for x in src_lines]
    dev_ref = [[prepare_sentence(x, case, model.truecase_tgt)] for x in ref_lines]
    weights, trace = tune(
        model, dev_src, dev_ref, model.weights,
        max_iterations=args.iterations, nbest_size=args.nbest, num_restarts=args.restarts, seed=args.seed,
    )
    save_weights(args.out, weights)
    trace_path = Path(args.out).parent / "tuning-trace.txt"
    trace.write(trace_path)
    best = trace.best()
    print(f"dev BLEU {trace.iterations[0].dev_bleu:.2f} -> {best.dev_bleu:.2f}; weights -> {args.out}")
    return EXIT_OK


def cmd_translate(args) -> int:
    from phrasemt.model import load_model
    from phrasemt.pipeline import serve_interactive, translate_file

    if args.interactive:
        serve_interactive(args.model, session_log=args.session_log)
        return EXIT_OK
    if not args.input or not args.output:
        raise UsageError("translate needs --input and --output unless --interactive is given")
    model = load_model(args.model)
    overrides = {"stack_size": args.stack, "distortion_limit": args.distortion_limit}
    model.config.update({k: str(v) for k, v in overrides.items() if v is not None})
    if args.nbest_file and not args.nbest:
        args.nbest = model.setting("nbest_size")
    n = translate_file(model, args.input, args.output, args.nbest or 0, args.nbest_file)
    print(f"translated {n} lines -> {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from phrasemt.evaluator import evaluate_files

    print(evaluate_files(args.hyp, args.ref).format())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from phrasemt.pipeline import PipelineConfig, run_pipeline

    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    cfg = PipelineConfig.load(args.config, overrides)
    result = run_pipeline(cfg)
    skipped = len(result.manifest.done) - len(result.executed)
    print(f"ran {len(result.executed)} steps ({', '.join(result.executed) or 'none'}); {max(skipped, 0)} up to date")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from phrasemt import __version__
    from phrasemt.aligner import HEURISTIC_ALIASES, HEURISTICS
    from phrasemt.corpus_prep import CASE_POLICIES

    p = _Parser(prog="phrasemt", description="Phrase-based statistical machine translation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("prepare", help="normalize, tokenize, truecase and clean a parallel corpus")
    s.add_argument("--src", required=True, type=_existing_file)
    s.add_argument("--tgt", required=True, type=_existing_file)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--max-len", type=int, default=80)
    s.add_argument("--max-ratio", type=float, default=9.0)
    s.add_argument("--case", choices=CASE_POLICIES, default="lowercase")
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train-lm", help="train an n-gram language model and write ARPA")
    s.add_argument("--corpus", required=True, type=_existing_file)
    s.add_argument("--order", type=int, default=3)
    s.add_argument("--smoothing", choices=("witten-bell", "mle"), default="witten-bell")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_lm)

    s = sub.add_parser("train-align", help="IBM Model 1/2 alignment in both directions, symmetrized")
    s.add_argument("--src", required=True, type=_existing_file)
    s.add_argument("--tgt", required=True, type=_existing_file)
    s.add_argument("--iterations-m1", type=int, default=5)
    s.add_argument("--iterations-m2", type=int, default=5)
    s.add_argument("--sym", choices=sorted(set(HEURISTICS) | set(HEURISTIC_ALIASES)), default="gdfa")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_train_align)

    s = sub.add_parser("extract", help="extract and score phrase pairs from an aligned directory")
    s.add_argument("--aligned", required=True, type=_existing_dir)
    s.add_argument("--max-phrase-len", type=int, default=7)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("binarise", help="convert a phrase or reordering text table to binary")
    s.add_argument("--in", dest="input", required=True, type=_existing_file)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_binarise)

    s = sub.add_parser("train-reorder", help="train the lexicalized reordering table")
    s.add_argument("--aligned", required=True, type=_existing_dir)
    s.add_argument("--max-phrase-len", type=int, default=7)
    s.add_argument("--sigma", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_reorder)

    s = sub.add_parser("package-model", help="assemble trained components into a model directory")
    s.add_argument("--lm", required=True, type=_existing_file)
    s.add_argument("--phrase-table", required=True, type=_existing_file)
    s.add_argument("--reordering-table", type=_existing_file)
    s.add_argument("--lex-dir", type=_existing_dir, help="directory holding lex.f2e and lex.e2f")
    s.add_argument("--truecase-dir", type=_existing_dir, help="directory holding truecase.src and truecase.tgt")
    s.add_argument("--weights", type=_existing_file)
    s.add_argument("--case", choices=CASE_POLICIES, default="lowercase")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_package_model)

    s = sub.add_parser("tune", help="minimum error rate training on a development set")
    s.add_argument("--model", required=True, type=_existing_dir)
    s.add_argument("--dev-src", required=True, type=_existing_file)
    s.add_argument("--dev-ref", required=True, type=_existing_file)
    s.add_argument("--iterations", type=int, default=10)
    s.add_argument("--nbest", type=int, default=100)
    s.add_argument("--restarts", type=int, default=8)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("translate", help="translate a file, or stdin with --interactive")
    s.add_argument("--model", required=True, type=_existing_dir)
    s.add_argument("--input", type=_existing_file)
    s.add_argument("--output")
    s.add_argument("--nbest", type=int, default=0)
    s.add_argument("--nbest-file")
    s.add_argument("--stack", type=int)
    s.add_argument("--distortion-limit", type=int)
    s.add_argument("--interactive", action="store_true")
    s.add_argument("--session-log", help="interactive session log (default MODEL/session.log)")
    s.set_defaults(func=cmd_translate)

    s = sub.add_parser("evaluate", help="corpus BLEU of a hypothesis file")
    s.add_argument("--hyp", required=True, type=_existing_file)
    s.add_argument("--ref", required=True, action="append", type=_existing_file)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", help="run or resume the full training pipeline from a config file")
    s.add_argument("--config", required=True, type=_existing_file)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    from phrasemt.binary_table import CorruptTableError
    from phrasemt.language_model import ARPAFormatError
    from phrasemt.pipeline import LockedError, PipelineError

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"phrasemt {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"phrasemt: {exc}", file=sys.stderr)
        internal = isinstance(exc.cause, (AssertionError, ArithmeticError))
        return EXIT_INTERNAL if internal else EXIT_DATA
    except (AssertionError, ArithmeticError) as exc:
        print(f"phrasemt {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, OSError, LockedError, CorruptTableError, ARPAFormatError, KeyError) as exc:
        print(f"phrasemt {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
