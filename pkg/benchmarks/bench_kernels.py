"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

The first numba call (compilation or cache load) is timed separately and
excluded from the steady-state numbers.
"""
import argparse
import json
import time

import numpy as np

from mgdl import _kernels
from mgdl import nn

CASES = [
    ("loss_grad  [1,32,32,1]   n=128", (1, 32, 32, 1), 128),
    ("loss_grad  [1,32,32,1]   n=4000", (1, 32, 32, 1), 4000),
    ("loss_grad  [32,32,32,1]  n=128", (32, 32, 32, 1), 128),
    ("loss_grad  [2,64,64,64,3] n=1024", (2, 64, 64, 64, 3), 1024),
]


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _network_case(widths, n, seed=0):
    spec = nn.MlpSpec(widths)
    p = nn.xavier_init(spec, seed)
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, widths[0]))
    Y = rng.normal(size=(n, widths[-1]))
    return p.flat, spec.widths_array(), X, Y


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)

    nb, npk = _kernels.numba_backend, _kernels.numpy_backend
    if nb is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rows = []
    flat, w, X, Y = _network_case((1, 8, 1), 4)
    t0 = time.perf_counter()
    nb.loss_grad(flat, w, X, Y)
    nb.forward(flat, w, X)
    nb.dft_amplitudes(np.zeros(8))
    first_call = time.perf_counter() - t0

    for label, widths, n in CASES:
        flat, w, X, Y = _network_case(widths, n)
        a = _best_of(lambda: nb.loss_grad(flat, w, X, Y), args.repeat)
        b = _best_of(lambda: npk.loss_grad(flat, w, X, Y), args.repeat)
        rows.append((label, a, b))

    flat, w, X, Y = _network_case((1, 32, 32, 1), 2000)
    rows.append(("forward    [1,32,32,1]   n=2000",
                 _best_of(lambda: nb.forward(flat, w, X), args.repeat),
                 _best_of(lambda: npk.forward(flat, w, X), args.repeat)))

    g = np.random.default_rng(1).normal(size=flat.size)
    m, v = np.zeros_like(flat), np.zeros_like(flat)
    rows.append(("adam_update %d params" % flat.size,
                 _best_of(lambda: nb.adam_update(flat.copy(), g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8),
                          args.repeat),
                 _best_of(lambda: npk.adam_update(flat.copy(), g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8),
                          args.repeat)))

    for N in (256, 1024):
        f = np.random.default_rng(N).normal(size=N)
        rows.append((f"dft_amplitudes N={N}",
                     _best_of(lambda: nb.dft_amplitudes(f), args.repeat),
                     _best_of(lambda: npk.dft_amplitudes(f), args.repeat)))

    print(f"numba first call (compile or cache load): {first_call * 1e3:.1f} ms")
    print(f"{'kernel':36s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    for label, a, b in rows:
        print(f"{label:36s} {a * 1e6:10.1f}us {b * 1e6:10.1f}us {b / a:7.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"first_call_s": first_call,
                       "cases": [{"kernel": l, "numba_s": a, "numpy_s": b} for l, a, b in rows]},
                      fh, indent=1)


if __name__ == "__main__":
    main()
