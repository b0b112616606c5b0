"""Compare the numba and numpy EM kernels on a synthetic alignment corpus.

    python3 benchmarks/bench_kernels.py --pairs 20000 --repeat 5

Both backends are imported directly, so the PHRASEMT_NO_NUMBA flag does
not matter here.  The first numba call (JIT compile or cache load) is
excluded from the timings.
"""
import argparse
import timeit

import numpy as np

from phrasemt import kernels
from phrasemt.aligner import _FlatCorpus


def synthetic_pairs(n_pairs, vocab, max_len, seed):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        n, m = rng.integers(1, max_len + 1, size=2)
        src = [f"s{k}" for k in rng.integers(0, vocab, size=n)]
        tgt = [f"t{k}" for k in rng.integers(0, vocab, size=m)]
        pairs.append((src, tgt))
    return pairs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=20000)
    parser.add_argument("--vocab", type=int, default=2000)
    parser.add_argument("--max-len", type=int, default=25)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not kernels.HAVE_NUMBA:
        parser.error("numba is not importable; nothing to compare")

    pairs = synthetic_pairs(args.pairs, args.vocab, args.max_len, args.seed)
    flat = _FlatCorpus(pairs, with_positions=True)
    rng = np.random.default_rng(args.seed)
    t = rng.uniform(0.05, 1.0, size=len(flat.params))
    a = rng.uniform(0.05, 1.0, size=len(flat.positions))
    inputs = (flat.row_ptr, flat.t_idx, flat.a_idx, t, a)
    print(f"{args.pairs} pairs, {flat.row_ptr.size - 1} rows, {flat.t_idx.size} entries")

    # warm up, and make sure the two paths agree before timing them
    tn, an, lln = kernels.e_step_numba(*inputs)
    tp, ap, llp = kernels.e_step_numpy(*inputs)
    assert np.allclose(tn, tp) and np.allclose(an, ap) and np.isclose(lln, llp)
    assert np.array_equal(kernels.viterbi_links_numba(*inputs), kernels.viterbi_links_numpy(*inputs))

    print(f"{'kernel':<14}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>10}")
    for name in ("e_step", "viterbi_links"):
        times = {}
        for backend in ("numpy", "numba"):
            fn = getattr(kernels, f"{name}_{backend}")
            best = min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat))
            times[backend] = best * 1000
        print(f"{name:<14}{times['numpy']:>12.2f}{times['numba']:>12.2f}{times['numpy'] / times['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
