"""Compiled vs pure-Python canonicalisation kernels.

    python3 benchmarks/bench_core.py [--vertices 6] [--matrices 300] [--repeat 3]

Both backends must produce identical codes; the script exits non-zero if not.
"""
import argparse
import sys
import time

import numpy as np

from edgetpu_eval.nas_graph import kernels


def best_of(repeat, fn):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t)
    return best, result


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--vertices", type=int, default=6)
    p.add_argument("--matrices", type=int, default=300, help="matrices to label in the matrix_codes run")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if kernels.BACKEND != "compiled":
        print("compiled core not importable; build with `pip install -e . --no-build-isolation`")
        return 1

    n = args.vertices
    rng = np.random.default_rng(args.seed)
    mats = kernels.valid_matrices(n, 9)
    mats = mats[rng.choice(len(mats), size=min(args.matrices, len(mats)), replace=False)]
    nlab = 3 ** (n - 2)
    singles = [(int(b), [0] + [int(x) for x in rng.integers(1, 4, n - 2)] + [4]) for b in mats]

    rows = []
    ok = True
    for name, fn in (
        ("canonical_code x%d" % len(singles),
         lambda pure: [kernels.canonical_code(n, b, lab, pure=pure) for b, lab in singles]),
        ("matrix_codes %dx%d" % (len(mats), nlab),
         lambda pure: kernels.matrix_codes(n, mats, pure=pure)),
        ("valid_matrices n=%d" % n,
         lambda pure: kernels.valid_matrices(n, 9, pure=pure)),
    ):
        tc, rc = best_of(args.repeat, lambda: fn(False))
        tp, rp = best_of(args.repeat, lambda: fn(True))
        same = np.array_equal(np.asarray(rc), np.asarray(rp))
        ok &= same
        rows.append((name, tc, tp, same))

    print(f"{'kernel':<28}{'compiled s':>12}{'pure s':>12}{'speedup':>10}  match")
    for name, tc, tp, same in rows:
        print(f"{name:<28}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {'yes' if same else 'NO'}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
