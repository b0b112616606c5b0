import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ngram_bleu
from phrasemt.evaluator import (
    bleu,
    bleu_sufficient_stats,
    brevity_penalty,
    closest_ref_length,
    corpus_stats,
    evaluate_files,
    smoothed_bleu,
    stats_to_bleu,
)

sent = st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=8)


def random_corpus(seed, n=8):
    rng = random.Random(seed)
    words = ["the", "cat", "dog", "sat", "on", "mat", "a"]

    def s():
        return [rng.choice(words) for _ in range(rng.randint(1, 9))]

    return [s() for _ in range(n)], [[s() for _ in range(rng.randint(1, 3))] for _ in range(n)]


class TestExamples:
    def test_identity(self):
        h = [["the", "cat", "sat", "on", "the", "mat"], ["a", "b", "c", "d", "e"]]
        r = bleu(h, [[x] for x in h])
        assert r.score == 100.0
        assert r.brevity_penalty == 1.0
        assert all(p == 1 for p in r.precisions)

    def test_six_token_example(self):
        r = bleu([["the", "cat", "sat", "on", "the", "mat"]], [[["the", "cat", "sat", "on", "a", "mat"]]])
        assert r.precisions == (Fraction(5, 6), Fraction(3, 5), Fraction(2, 4), Fraction(1, 3))
        assert r.brevity_penalty == 1.0
        assert r.score == pytest.approx(53.7, abs=0.1)

    def test_clipping(self):
        r = bleu([["the"] * 4], [[["the", "cat"]]])
        assert r.precisions[0] == Fraction(1, 4)
        assert r.precisions[1] == 0
        assert r.score == 0.0

    def test_closest_reference_ties_shorter(self):
        assert closest_ref_length(5, [3, 7, 4, 6]) == 4

    def test_brevity_penalty(self):
        assert brevity_penalty(10, 10) == 1.0
        assert brevity_penalty(0, 3) == 0.0
        assert brevity_penalty(5, 10) == pytest.approx(np.exp(-1))

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            bleu([["a"]], [])
        with pytest.raises(ValueError):
            bleu([], [])

    def test_format(self):
        text = bleu([["a", "b", "c", "d"]], [[["a", "b", "c", "d"]]]).format()
        assert text.startswith("BLEU = 100.00, p1/p2/p3/p4 = 100.0/100.0/100.0/100.0")


class TestStats:
    def test_perfect_sentence(self):
        s = bleu_sufficient_stats(["a", "b", "c"], [["a", "b", "c"]])
        assert list(s[:4]) == list(s[4:8])

    @given(st.lists(st.tuples(sent, sent), min_size=2, max_size=6), st.integers(1, 5))
    def test_additive(self, pairs, cut):
        hyps = [h for h, _ in pairs]
        refs = [[r] for _, r in pairs]
        cut = min(cut, len(pairs) - 1)
        whole = corpus_stats(hyps, refs)
        parts = corpus_stats(hyps[:cut], refs[:cut]) + corpus_stats(hyps[cut:], refs[cut:])
        np.testing.assert_array_equal(whole, parts)

    @pytest.mark.parametrize("seed", range(20))
    def test_stats_path_equals_direct(self, seed):
        hyps, refs = random_corpus(seed)
        direct = bleu(hyps, refs).score
        via_stats = stats_to_bleu(sum(bleu_sufficient_stats(h, r) for h, r in zip(hyps, refs))).score
        assert via_stats == pytest.approx(direct, abs=1e-9)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_oracle(self, seed):
        hyps, refs = random_corpus(seed, n=12)
        report = bleu(hyps, refs)
        score, precisions, bp = ngram_bleu(hyps, refs)
        assert report.score == pytest.approx(score, abs=1e-9)
        assert [float(p) for p in report.precisions] == pytest.approx(precisions, abs=1e-12)
        assert report.brevity_penalty == pytest.approx(bp, abs=1e-12)

    def test_smoothed_positive_without_higher_matches(self):
        s = bleu_sufficient_stats(["a", "x", "b", "y"], [["a", "b"]])
        assert stats_to_bleu(s).score == 0.0
        assert smoothed_bleu(s) > 0.0


class TestProperties:
    @given(st.lists(sent, min_size=1, max_size=5))
    def test_self_is_hundred(self, hyps):
        assert bleu(hyps, [[h] for h in hyps]).score == pytest.approx(100.0, abs=1e-9)

    @given(st.lists(st.tuples(sent, sent), min_size=1, max_size=6), st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        a = bleu([h for h, _ in pairs], [[r] for _, r in pairs])
        b = bleu([h for h, _ in shuffled], [[r] for _, r in shuffled])
        assert a.score == pytest.approx(b.score, abs=1e-9)

    @given(st.lists(st.tuples(sent, sent), min_size=1, max_size=6))
    def test_ranges(self, pairs):
        r = bleu([h for h, _ in pairs], [[x] for _, x in pairs])
        assert 0.0 <= r.score <= 100.0 + 1e-9
        assert 0.0 < r.brevity_penalty <= 1.0
        assert (r.brevity_penalty == 1.0) == (r.candidate_length >= r.reference_length)


def test_evaluate_files_tokenizes(tmp_path):
    (tmp_path / "hyp").write_text("the cat sat.\nhello, world\n")
    (tmp_path / "ref").write_text("the cat sat .\nhello , world\n")
    assert evaluate_files(tmp_path / "hyp", [tmp_path / "ref"]).score == 100.0
    (tmp_path / "short").write_text("one line\n")
    with pytest.raises(ValueError):
        evaluate_files(tmp_path / "hyp", [tmp_path / "short"])
