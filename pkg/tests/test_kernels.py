import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phrasemt import kernels
from phrasemt.aligner import _FlatCorpus

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")

words = st.sampled_from(list("abcdef"))
corpora = st.lists(
    st.tuples(st.lists(words, min_size=1, max_size=6), st.lists(words, min_size=1, max_size=6)),
    min_size=1,
    max_size=6,
)


def _inputs(pairs, positions, seed):
    rng = np.random.default_rng(seed)
    flat = _FlatCorpus(pairs, with_positions=positions)
    t = rng.uniform(0.01, 1.0, size=len(flat.params))
    a = rng.uniform(0.01, 1.0, size=max(1, len(flat.positions))) if positions else np.ones(1)
    return flat.row_ptr, flat.t_idx, flat.a_idx, t, a


@needs_numba
@settings(max_examples=40)
@given(corpora, st.booleans(), st.integers(0, 2**32 - 1))
def test_e_step_backends_agree(pairs, positions, seed):
    args = _inputs(pairs, positions, seed)
    tn, an, ln = kernels.e_step_numpy(*args)
    tb, ab, lb = kernels.e_step_numba(*args)
    np.testing.assert_allclose(tb, tn, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(ab, an, rtol=1e-12, atol=1e-12)
    assert lb == pytest.approx(ln, rel=1e-12)


@needs_numba
@settings(max_examples=40)
@given(corpora, st.booleans(), st.integers(0, 2**32 - 1))
def test_viterbi_backends_agree(pairs, positions, seed):
    args = _inputs(pairs, positions, seed)
    np.testing.assert_array_equal(kernels.viterbi_links_numba(*args), kernels.viterbi_links_numpy(*args))


def test_viterbi_ties_pick_first():
    row_ptr = np.array([0, 3], dtype=np.int64)
    idx = np.array([0, 1, 2], dtype=np.int64)
    t = np.array([0.2, 0.5, 0.5])
    zero = np.zeros(3, dtype=np.int64)
    assert kernels.viterbi_links_numpy(row_ptr, idx, zero, t, np.ones(1))[0] == 1
    if kernels.HAVE_NUMBA:
        assert kernels.viterbi_links_numba(row_ptr, idx, zero, t, np.ones(1))[0] == 1


def test_posteriors_sum_to_rows():
    args = _inputs([(["a", "b"], ["c", "d", "e"])], False, 0)
    counts, _, _ = kernels.e_step(*args)
    assert counts.sum() == pytest.approx(3.0)


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("0", "numba" if kernels.HAVE_NUMBA else "numpy")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, PHRASEMT_NO_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from phrasemt import kernels; print(kernels.BACKEND, kernels.e_step.__name__)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    ).stdout.split()
    assert out == [expected, f"e_step_{expected}"]
