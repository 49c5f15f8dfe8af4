"""Compiled vs pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import random
import timeit

from eacausal import _kernels_py as py

try:
    from eacausal import _kernels as cy
except ImportError:
    cy = None


def cases(seed=0):
    rng = random.Random(seed)
    seqs = [[rng.randrange(50) for _ in range(rng.randrange(20, 120))] for _ in range(40)]
    pairs = list(zip(seqs[::2], seqs[1::2]))
    words = [f"s1:w{rng.randrange(10_000)}" for _ in range(5_000)]
    blobs = [w.encode() for w in words]
    return {
        "lcs_length (20 pairs, len 20-120)": lambda m: [m.lcs_length(a, b) for a, b in pairs],
        "murmurhash3_32 (5000 keys)": lambda m: [m.murmurhash3_32(b, 0) for b in blobs],
        "hash_features (5000 keys)": lambda m: m.hash_features(words, 0, 1 << 18),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        print("compiled extension not built; only the Python path is available")
    print(f"{'kernel':38s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for name, fn in cases().items():
        if cy is not None:
            assert fn(py) == fn(cy), name
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:38s} {t_py:10.2f} {'-':>12s} {'-':>8s}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:38s} {t_py:10.2f} {t_cy:12.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
