"""Time the compiled kernels against the pure-numpy reference.

Run with the extension built (a plain editable install):

    /usr/bin/python3 benchmarks/bench_kernels.py [--points N] [--repeat K]

Both implementations are imported directly, so the COXMAP_PURE_PYTHON
switch is not needed here; the script exits if the extension is missing.
"""

import argparse
import sys
import time

import numpy as np

from coxmap._kernels import _ref

try:
    from coxmap._kernels import _fast
except ImportError:
    sys.exit("compiled kernels not built; reinstall without COXMAP_NO_EXT=1")


def best_of(repeat, fn, *args):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def flat(result):
    parts = result if isinstance(result, tuple) else (result,)
    return np.concatenate(
        [np.atleast_1d(np.asarray(p, dtype=float)).ravel() for p in parts]
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(42)
    n = args.points
    x = rng.uniform(0, 100, n)
    y = rng.uniform(0, 100, n)
    lam = rng.uniform(0.5, 2.0, n)
    rgrid = np.linspace(0.2, 25.0, 128)
    gu, gv = np.meshgrid(np.linspace(0, 1, 255), np.linspace(0, 1, 255),
                         indexing="ij")
    setcov = 5000.0 + 1000.0 * np.cos(3 * gu) * np.sin(2 * gv)
    u0 = v0 = 127.0
    ring = np.array([(0.0, 0.0), (100.0, 0.0), (100.0, 70.0), (30.0, 100.0),
                     (0.0, 60.0)])
    gx, gy = np.meshgrid(np.linspace(-5, 105, 512), np.linspace(-5, 105, 512))
    yv = rng.normal(0, 1, 256 * 256)
    counts = rng.poisson(1.0, yv.size).astype(float)
    expo = rng.uniform(0.5, 1.5, yv.size)

    cases = [
        ("points_in_polygon (512x512 grid)", "points_in_polygon",
         (gx, gy, [ring], 1e-9)),
        (f"pcf_pairs ({n} points, 128 r)", "pcf_pairs",
         (x, y, lam, rgrid, 1.0, setcov, u0, v0, 1.0)),
        (f"kfun_pairs ({n} points, 128 r)", "kfun_pairs",
         (x, y, lam, rgrid, setcov, u0, v0, 1.0)),
        ("poisson_ll_grad (256x256 cells)", "poisson_ll_grad",
         (yv, counts, expo)),
    ]

    print(f"{'kernel':<35} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for label, name, case_args in cases:
        ref_fn = getattr(_ref, name)
        fast_fn = getattr(_fast, name)
        if not np.allclose(flat(ref_fn(*case_args)), flat(fast_fn(*case_args)),
                           rtol=1e-10, atol=1e-12):
            sys.exit(f"{name}: implementations disagree")
        t_ref = best_of(args.repeat, ref_fn, *case_args)
        t_fast = best_of(args.repeat, fast_fn, *case_args)
        print(f"{label:<35} {t_ref * 1e3:>8.1f}ms {t_fast * 1e3:>8.1f}ms "
              f"{t_ref / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
