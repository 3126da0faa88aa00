"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is fed identical inputs on both backends; outputs are checked for
bit equality before timings are reported.
"""
import argparse
import json
import time

import numpy as np

from cpcsim import _kernels_py

try:
    from cpcsim import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _cdf(rng, shape):
    p = rng.random(shape)
    return np.ascontiguousarray(np.cumsum(p / p.sum(axis=-1, keepdims=True), axis=-1))


def cases(rng):
    # fixed-parameter MH chain on an oracle-sized instance
    rounds, d, w = 62_500, 2, 2
    cdf = _cdf(rng, (2, d, w))
    acc = rng.random((2, d, w, w))
    u = rng.random((rounds, d, 2))
    sp = (np.arange(rounds) % 2).astype(np.int64)
    yield "mh_chain (62500 rounds, D=2, W=2)", "mh_chain", (cdf, acc, np.zeros(d, np.int64), u, sp, 1 - sp)

    rounds, d, w = 2_000, 100, 4
    cdf = _cdf(rng, (2, d, w))
    acc = rng.random((2, d, w, w))
    u = rng.random((rounds, d, 2))
    sp = (np.arange(rounds) % 2).astype(np.int64)
    yield "mh_chain (2000 rounds, D=100, W=4)", "mh_chain", (cdf, acc, np.zeros(d, np.int64), u, sp, 1 - sp)

    n, w = 100_000, 4
    yield "sample_rows (100000 x 4)", "sample_rows", (_cdf(rng, (n, w)), rng.random(n))

    d, w = 100, 4
    yield "naming_sweep (D=100, W=4)", "naming_sweep", (
        _cdf(rng, (d, w)), rng.random((d, w, w)), rng.integers(w, size=d), rng.random((d, 2)), 0,
    )


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def bench(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _kernels_c is None:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")

    rows = []
    for label, name, inputs in cases(np.random.default_rng(args.seed)):
        t_py, out_py = bench(getattr(_kernels_py, name), inputs, args.repeat)
        t_c, out_c = bench(getattr(_kernels_c, name), inputs, args.repeat)
        rows.append({"kernel": label, "python_s": t_py, "cython_s": t_c,
                     "speedup": t_py / t_c if t_c > 0 else float("inf"),
                     "identical": bool(_same(out_py, out_c))})

    width = max(len(r["kernel"]) for r in rows)
    print(f"{'kernel':<{width}}  {'python':>10}  {'cython':>10}  {'speedup':>8}  identical")
    for r in rows:
        print(f"{r['kernel']:<{width}}  {r['python_s']:>9.4f}s  {r['cython_s']:>9.4f}s  "
              f"{r['speedup']:>7.1f}x  {r['identical']}")
    print(json.dumps(rows))
    if not all(r["identical"] for r in rows):
        raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
