import io
import shutil
import subprocess
import sys

import pytest

from phrasemt import cli
from phrasemt.binary_table import BinaryTable
from phrasemt.corpus_prep import read_lines


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory, toy_dir):
    d = tmp_path_factory.mktemp("cli")
    for split, n in (("train", 80), ("dev", 5)):
        for side in ("en", "ar"):
            lines = read_lines(toy_dir / f"{split}.{side}")[:n]
            (d / f"{split}.{side}").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return d


@pytest.fixture(scope="module")
def model_dir(small_corpus):
    d = small_corpus
    assert run("prepare", "--src", d / "train.en", "--tgt", d / "train.ar", "--out-dir", d / "prep") == 0
    assert run("train-lm", "--corpus", d / "prep" / "corpus.tgt", "--order", 3, "--out", d / "lm.arpa") == 0
    assert run("train-align", "--src", d / "prep" / "corpus.src", "--tgt", d / "prep" / "corpus.tgt",
               "--iterations-m1", 3, "--iterations-m2", 2, "--sym", "gdfa", "--out-dir", d / "aligned") == 0
    assert run("extract", "--aligned", d / "aligned", "--max-phrase-len", 5, "--out", d / "pt.txt") == 0
    assert run("train-reorder", "--aligned", d / "aligned", "--sigma", 0.5, "--out", d / "rt.txt") == 0
    assert run("binarise", "--in", d / "rt.txt", "--out", d / "rt.bin") == 0
    assert run("package-model", "--lm", d / "lm.arpa", "--phrase-table", d / "pt.txt",
               "--reordering-table", d / "rt.txt", "--lex-dir", d / "aligned",
               "--truecase-dir", d / "prep", "--out", d / "model") == 0
    return d / "model"


def test_component_chain_produces_model(model_dir):
    for name in ("lm.arpa", "phrase-table.txt", "reordering-table.txt", "lex.f2e", "truecase.tgt",
                 "weights.txt", "config.txt"):
        assert (model_dir / name).is_file(), name


def test_binarise_detects_score_count(small_corpus, model_dir):
    assert BinaryTable(small_corpus / "rt.bin").n_scores == 6
    assert run("binarise", "--in", model_dir / "phrase-table.txt", "--out", small_corpus / "pt.bin") == 0
    assert BinaryTable(small_corpus / "pt.bin").n_scores == 4


def test_translate_and_evaluate(small_corpus, model_dir, capsys):
    d = small_corpus
    out, nb = d / "hyp.ar", d / "hyp.nbest"
    assert run("translate", "--model", model_dir, "--input", d / "train.en", "--output", out,
               "--nbest", 2, "--nbest-file", nb, "--stack", 50, "--distortion-limit", 4) == 0
    assert len(out.read_text().splitlines()) == 80
    assert nb.read_text().count("\n") <= 160
    capsys.readouterr()
    assert run("evaluate", "--hyp", out, "--ref", d / "train.ar") == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("BLEU = ") and "hyp_len=" in line and "ref_len=" in line


def test_tune_writes_weights_and_trace(small_corpus, model_dir, tmp_path):
    d = small_corpus
    assert run("tune", "--model", model_dir, "--dev-src", d / "dev.en", "--dev-ref", d / "dev.ar",
               "--iterations", 2, "--nbest", 10, "--restarts", 1, "--out", tmp_path / "weights.txt") == 0
    assert len((tmp_path / "weights.txt").read_text().splitlines()) == 15
    assert 1 <= len((tmp_path / "tuning-trace.txt").read_text().splitlines()) <= 2


def test_interactive(model_dir, monkeypatch, capsys, tmp_path):
    monkeypatch.setattr(sys, "stdin", io.StringIO("The doctor laughs.\n\n"))
    assert run("translate", "--model", model_dir, "--interactive", "--session-log", tmp_path / "log") == 0
    assert len(capsys.readouterr().out.splitlines()) == 2
    assert len((tmp_path / "log").read_text().splitlines()) == 2


class TestExitCodes:
    def test_no_command(self):
        assert run() == 1

    def test_unknown_command(self):
        assert run("fly") == 1

    def test_missing_required(self):
        assert run("train-lm", "--order", 3) == 1

    def test_missing_input_file(self, tmp_path):
        assert run("evaluate", "--hyp", tmp_path / "nope", "--ref", tmp_path / "nope") == 1

    def test_translate_without_io(self, model_dir):
        assert run("translate", "--model", model_dir) == 1

    def test_bad_set_override(self, tmp_path):
        (tmp_path / "c").write_text("src = a\n")
        assert run("pipeline", "--config", tmp_path / "c", "--set", "novalue") == 1

    def test_malformed_arpa_is_data_error(self, model_dir, tmp_path, capsys):
        broken = tmp_path / "model"
        shutil.copytree(model_dir, broken)
        (broken / "lm.arpa").write_text("\\data\\\nngram 1=1\n\n\\1-grams:\nbad\n\\end\\\n")
        (tmp_path / "in").write_text("hello\n")
        assert run("translate", "--model", broken, "--input", tmp_path / "in", "--output", tmp_path / "out") == 2
        assert "line 5" in capsys.readouterr().err

    def test_unknown_config_key_is_data_error(self, tmp_path):
        (tmp_path / "c").write_text("src = a\nbogus = 1\n")
        assert run("pipeline", "--config", tmp_path / "c") == 2

    def test_invariant_violation_is_internal(self, monkeypatch, tmp_path):
        def broken(args):
            raise AssertionError("coverage popcount mismatch")

        (tmp_path / "h").write_text("a\n")
        parser = cli.build_parser()
        monkeypatch.setattr(cli, "build_parser", lambda: parser)
        parser._subparsers._group_actions[0].choices["evaluate"].set_defaults(func=broken)
        assert run("evaluate", "--hyp", tmp_path / "h", "--ref", tmp_path / "h") == 3


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "phrasemt.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("phrasemt")
