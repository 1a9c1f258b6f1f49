"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 10] [--repeat 3]

Both backends are run on identical inputs; outputs are checked for equality
before timings are reported.
"""

import argparse
import timeit

import numpy as np

from ogsched import _kernels_py

try:
    from ogsched import _kernels as _compiled
except ImportError:
    _compiled = None


def _inputs(n: int, m: int, seed: int):
    gen = np.random.default_rng(seed)
    size = 1 << n
    prev = gen.uniform(0, 5, size)
    prev[0] = 0.0
    table = gen.uniform(0, 5, size)
    table[gen.random(size) < 0.1] = np.inf
    masks = gen.integers(0, size, size=m).astype(np.uint64)
    costs = gen.uniform(1, 4, m)
    return prev, table, masks, costs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10, help="jobs (subset DP is 3^n)")
    ap.add_argument("--m", type=int, default=16, help="sets (cover table is 2^m)")
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    prev, table, masks, costs = _inputs(a.n, a.m, 0)
    backends = [("python", _kernels_py)] + ([("compiled", _compiled)] if _compiled else [])
    if _compiled is None:
        print("compiled extension not built; timing the fallback only")
    cases = {
        f"subset_dp sum n={a.n}": lambda k: k.subset_dp(prev, table, 0),
        f"subset_dp max n={a.n}": lambda k: k.subset_dp(prev, table, 1),
        f"cover_table m={a.m}": lambda k: k.cover_table(masks, costs),
    }
    for name, fn in cases.items():
        outs = [fn(k) for _, k in backends]
        for o in outs[1:]:
            for x, y in zip(outs[0], o):
                assert np.array_equal(np.asarray(x), np.asarray(y)), f"{name}: backends disagree"
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=a.repeat)) for b, k in backends}
        line = "  ".join(f"{b} {t * 1e3:9.2f} ms" for b, t in times.items())
        speed = f"  speedup {times['python'] / times['compiled']:.0f}x" if "compiled" in times else ""
        print(f"{name:<22} {line}{speed}")


if __name__ == "__main__":
    main()
