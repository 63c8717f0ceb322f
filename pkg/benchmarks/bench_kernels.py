"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once untimed (numba compile), then ``--repeat`` times; the
best wall time is reported along with the max abs difference of outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from causal_cvar import kernels


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    rng = np.random.default_rng(0)
    pc = np.array([0.4, 0.3, 0.2, 0.1])
    px, pxy = 0.55, 0.3
    alo = np.maximum(0.0, pxy + pc - 1)
    blo = np.maximum(0.0, px + pc - 1)
    bhi = np.minimum(pc, px)
    level_cdf = np.cumsum(np.array([[0.568, 0.432], [0.504, 0.496]]), axis=1)
    y2 = np.array([0.0, 1.0])
    u = rng.random(5000)
    coef = rng.random((20000, 4))
    cap = rng.random((20000, 4))
    total = rng.random(20000) * cap.sum(axis=1)
    lo = np.array([0.05, 0.1, 0.2, 0.1])
    hi = np.array([0.3, 0.35, 0.5, 0.4])
    y4 = np.array([0.0, 0.3, 0.6, 1.0])
    kept = np.array([0, 1])
    clip = np.array([0.3883, 0.4522])
    return {
        "greedy_fill 20k rows": lambda K: K.greedy_fill(coef, cap, total, True),
        "do_grid_extreme |C|=4 step 5e-3": lambda K: K.do_grid_extreme(pc, px, pxy, alo, blo, bhi, 5e-3, True)[0],
        "cvar_grid_extremes m=4 step 2e-3": lambda K: np.array(K.cvar_grid_extremes(lo, hi, y4, 0.4, 2e-3, 3)[:2]),
        "run_bandit clipped n=5000": lambda K: K.run_bandit(level_cdf, y2, 1.0, 0.75, 5000, kept, clip, 0, u)[0],
        "run_bandit ucb1 n=5000": lambda K: K.run_bandit(level_cdf, y2, 1.0, 0.75, 5000, kept,
                                                         np.full(2, np.inf), 1, u)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    NP = kernels.get_backend("numpy")
    if not kernels.numba_available():
        print("numba not installed; nothing to compare")
        return
    NB = kernels.get_backend("numba")
    print(f"{'kernel':<36} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8} {'max diff':>9}")
    for name, fn in cases().items():
        t_np, out_np = best_of(lambda: fn(NP), args.repeat)
        t_nb, out_nb = best_of(lambda: fn(NB), args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_np, dtype=float) - np.asarray(out_nb, dtype=float))))
        print(f"{name:<36} {t_np * 1e3:>11.2f} {t_nb * 1e3:>11.2f} {t_np / t_nb:>7.1f}x {diff:>9.1e}")


if __name__ == "__main__":
    main()
