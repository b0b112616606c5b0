import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_decoder_model
from oracles import exhaustive_decode
from phrasemt.decoder import DecodingError, compute_future_cost, translate
from phrasemt.language_model import train_lm
from phrasemt.model import FWD, N_FEATURES, TranslationModel, score_features, uniform_weights
from phrasemt.phrase_model import PhraseTable
from phrasemt.reordering import ReorderingTable

EXHAUSTIVE = dict(stack_size=10**6, distortion_limit=-1, ttable_limit=0)


def tiny_model(rows, lm_corpus=(("x",),), weights=None):
    return TranslationModel(
        lm=train_lm([list(s) for s in lm_corpus], 2),
        phrase_table=PhraseTable(rows),
        reordering=ReorderingTable(),
        weights=uniform_weights() if weights is None else weights,
    )


def random_sentences(seed, words, count, max_len=5):
    rng = random.Random(seed)
    return [[rng.choice(words) for _ in range(rng.randint(1, max_len))] for _ in range(count)]


class TestScoreFeatures:
    def test_zero_weights(self):
        assert score_features(np.arange(14.0), np.zeros(14)) == 0.0

    def test_unit_coordinate(self):
        e = np.zeros(14)
        e[3] = 1.0
        assert score_features(np.arange(14.0), e) == 3.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            score_features(np.zeros(13), np.zeros(14))

    @given(st.lists(st.floats(-100, 100), min_size=14, max_size=14), st.floats(0.1, 10))
    def test_linear_in_weights(self, h, c):
        w = np.linspace(-1, 1, 14)
        assert score_features(h, c * w) == pytest.approx(c * score_features(h, w), rel=1e-9, abs=1e-9)


class TestBasics:
    def test_empty_input(self):
        result = translate(tiny_model([(("a",), ("x",), (0.5,) * 4)]), [])
        assert result.best == []

    def test_single_option_verbatim(self):
        result = translate(tiny_model([(("a",), ("x", "y"), (0.5,) * 4)]), ["a"])
        assert result.best == ["x", "y"]

    def test_empty_model(self):
        with pytest.raises(DecodingError):
            translate(tiny_model([]), ["a"])

    def test_oov_copied(self):
        result = translate(tiny_model([(("a",), ("x",), (0.5,) * 4)]), ["a", "qq"])
        assert result.best == ["x", "qq"]
        assert result.nbest[0].features[1] == pytest.approx(np.log(0.5) - 10)

    def test_deterministic(self):
        model, words = random_decoder_model(3)
        s = random_sentences(1, words, 1)[0]
        a = translate(model, s, nbest_size=10)
        b = translate(model, s, nbest_size=10)
        assert [e.tokens for e in a.nbest] == [e.tokens for e in b.nbest]
        assert [e.score for e in a.nbest] == [e.score for e in b.nbest]


class TestFutureCost:
    def test_single_word(self):
        model = tiny_model([(("a",), ("x",), (0.5,) * 4)])
        cost = compute_future_cost(model, ["a"])
        w = model.weights
        expected = 4 * np.log(0.5) + w[5] + w[6] + w[0] * model.lm.logprob("x")
        assert cost[0][0] == pytest.approx(expected)

    @pytest.mark.parametrize("seed", range(5))
    def test_split_additivity(self, seed):
        model, words = random_decoder_model(seed)
        s = random_sentences(seed, words, 1, max_len=6)[0]
        cost = compute_future_cost(model, s)
        n = len(s)
        for a in range(n):
            for c in range(a, n):
                for b in range(a, c):
                    assert cost[a][c] >= cost[a][b] + cost[b + 1][c] - 1e-12


class TestExhaustive:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_oracle(self, seed):
        model, words = random_decoder_model(seed)
        for s in random_sentences(seed, words, 5, max_len=4):
            result = translate(model, s, **EXHAUSTIVE)
            score, target = exhaustive_decode(model, s)
            assert result.nbest[0].score == pytest.approx(score, abs=1e-9)
            assert tuple(result.best) == target

    @pytest.mark.parametrize("seed", range(4))
    def test_recombination_is_safe(self, seed):
        model, words = random_decoder_model(seed + 10)
        for s in random_sentences(seed, words, 4, max_len=4):
            on = translate(model, s, recombine=True, **EXHAUSTIVE)
            off = translate(model, s, recombine=False, **EXHAUSTIVE)
            assert on.nbest[0].score == pytest.approx(off.nbest[0].score, abs=1e-9)
            assert on.best == off.best


class TestNBest:
    @pytest.mark.parametrize("seed", range(4))
    def test_self_consistent(self, seed):
        model, words = random_decoder_model(seed)
        for s in random_sentences(seed, words, 3):
            nbest = translate(model, s, nbest_size=20).nbest
            scores = [e.score for e in nbest]
            assert scores == sorted(scores, reverse=True)
            assert len({e.tokens for e in nbest}) == len(nbest)
            for e in nbest:
                assert e.features.shape == (N_FEATURES,)
                assert e.score == pytest.approx(float(e.features @ model.weights), abs=1e-6)

    def test_size_one_is_best(self):
        model, words = random_decoder_model(2)
        s = random_sentences(2, words, 1)[0]
        r = translate(model, s, nbest_size=1)
        assert len(r.nbest) == 1 and list(r.nbest[0].tokens) == r.best

    @settings(max_examples=15)
    @given(st.integers(0, 50), st.floats(0.1, 20.0))
    def test_positive_scaling_preserves_order(self, seed, c):
        model, words = random_decoder_model(seed)
        s = random_sentences(seed, words, 1, max_len=4)[0]
        a = translate(model, s, nbest_size=10)
        b = translate(model.with_weights(c * model.weights), s, nbest_size=10)
        assert a.best == b.best
        assert [e.tokens for e in a.nbest] == [e.tokens for e in b.nbest]


class TestMonotone:
    @pytest.mark.parametrize("seed", range(6))
    def test_zero_distortion_follows_source_order(self, seed):
        model, words = random_decoder_model(seed)
        w = model.weights.copy()
        w[FWD:FWD + 6] = 0.0
        model = model.with_weights(w)
        for s in random_sentences(seed, words, 4, max_len=6):
            for entry in translate(model, s, distortion_limit=0, nbest_size=5).nbest:
                starts = [p.start for p in entry.phrases]
                assert starts == sorted(starts)
                assert all(p.start == q.end + 1 for q, p in zip(entry.phrases, entry.phrases[1:]))
