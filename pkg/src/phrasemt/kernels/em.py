"""EM kernels for the IBM alignment models over a flattened corpus.

The corpus is laid out as CSR rows: one row per generated-side token, and
inside a row one entry per conditioning position, NULL first.  Entry ``e``
reads the lexical parameter ``t[t_idx[e]]`` and the position parameter
``a[a_idx[e]]`` (Model 1 passes ``a = [1.0]`` and all-zero ``a_idx``).
"""
import numpy as np

from phrasemt import kernels as _k


def e_step_numpy(row_ptr, t_idx, a_idx, t, a):
    """Expected counts for t and a plus the summed log row-likelihood."""
    lengths = np.diff(row_ptr)
    rows = np.repeat(np.arange(lengths.size), lengths)
    weights = t[t_idx] * a[a_idx]
    denom = np.bincount(rows, weights=weights, minlength=lengths.size)
    post = weights / denom[rows]
    t_counts = np.bincount(t_idx, weights=post, minlength=t.size)
    a_counts = np.bincount(a_idx, weights=post, minlength=a.size)
    return t_counts, a_counts, float(np.log(denom).sum())


def viterbi_links_numpy(row_ptr, t_idx, a_idx, t, a):
    """Per row, the offset of the best entry (0 is NULL); ties go to the first."""
    lengths = np.diff(row_ptr)
    rows = np.repeat(np.arange(lengths.size), lengths)
    weights = t[t_idx] * a[a_idx]
    best = np.maximum.reduceat(weights, row_ptr[:-1])
    local = np.arange(weights.size) - row_ptr[rows]
    marked = np.where(weights == best[rows], local, np.iinfo(np.int64).max)
    return np.minimum.reduceat(marked, row_ptr[:-1]).astype(np.int64)


if _k.HAVE_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def e_step_numba(row_ptr, t_idx, a_idx, t, a):
        t_counts = np.zeros(t.size)
        a_counts = np.zeros(a.size)
        loglik = 0.0
        for r in range(row_ptr.size - 1):
            lo = row_ptr[r]
            hi = row_ptr[r + 1]
            denom = 0.0
            for e in range(lo, hi):
                denom += t[t_idx[e]] * a[a_idx[e]]
            loglik += np.log(denom)
            for e in range(lo, hi):
                p = t[t_idx[e]] * a[a_idx[e]] / denom
                t_counts[t_idx[e]] += p
                a_counts[a_idx[e]] += p
        return t_counts, a_counts, loglik

    @njit(cache=True, nogil=True)
    def viterbi_links_numba(row_ptr, t_idx, a_idx, t, a):
        out = np.empty(row_ptr.size - 1, dtype=np.int64)
        for r in range(row_ptr.size - 1):
            lo = row_ptr[r]
            best = -1.0
            arg = 0
            for e in range(lo, row_ptr[r + 1]):
                w = t[t_idx[e]] * a[a_idx[e]]
                if w > best:
                    best = w
                    arg = e - lo
            out[r] = arg
        return out

else:  # pragma: no cover
    e_step_numba = e_step_numpy
    viterbi_links_numba = viterbi_links_numpy


if _k.USE_NUMBA:
    e_step = e_step_numba
    viterbi_links = viterbi_links_numba
else:
    e_step = e_step_numpy
    viterbi_links = viterbi_links_numpy
