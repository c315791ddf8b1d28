#!/usr/bin/env python3
"""Time the hot kernels under both backends (compiled vs pure numpy).

Sizes mimic a large run: ~100k ledgers averaging ~180 days each, a few
breakpoints per ledger, plus the price preprocessing kernels.  The compiled
backend pays a one-time JIT cost on first call (cached afterwards), so each
kernel is warmed once before timing.

Usage:  python3 benchmarks/bench_backends.py [--ledgers N] [--repeat K]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tokenpnl.kernels import load_backend  # noqa: E402


def build_expand_inputs(rng, n_ledgers, avg_days=180, n_breaks=6):
    n_days = rng.integers(avg_days // 2, avg_days * 3 // 2, n_ledgers)
    out_off = np.zeros(n_ledgers + 1, dtype=np.int64)
    np.cumsum(n_days, out=out_off[1:])
    brk_counts = np.minimum(n_days, rng.integers(1, n_breaks + 1, n_ledgers))
    brk_off = np.zeros(n_ledgers + 1, dtype=np.int64)
    np.cumsum(brk_counts, out=brk_off[1:])
    total_breaks = int(brk_off[-1])
    brk_day = np.empty(total_breaks, dtype=np.int64)
    for i in range(n_ledgers):
        lo, hi = brk_off[i], brk_off[i + 1]
        days = np.sort(rng.choice(int(n_days[i]), size=int(hi - lo), replace=False))
        days[0] = 0
        brk_day[lo:hi] = days
    brk_q = rng.uniform(0, 1000, total_breaks)
    brk_cb = rng.uniform(0, 5000, total_breaks)
    brk_r = rng.normal(0, 200, total_breaks)
    prices = rng.uniform(0.01, 10, int(n_days.max()) + 1)
    price_ptr = np.zeros(n_ledgers, dtype=np.int64)
    return out_off, brk_off, brk_day, brk_q, brk_cb, brk_r, price_ptr, prices


def build_fill_inputs(rng, n_days=365, n_obs=40):
    idx = np.sort(rng.choice(n_days, size=n_obs, replace=False)).astype(np.int64)
    idx[0] = 0
    idx = np.unique(idx)
    return idx, rng.uniform(0.01, 10, len(idx)), n_days


def build_median_inputs(rng, n_groups=20_000, max_obs=30):
    sizes = rng.integers(1, max_obs, n_groups)
    off = np.zeros(n_groups + 1, dtype=np.int64)
    np.cumsum(sizes, out=off[1:])
    values = rng.uniform(0.01, 100, int(off[-1]))
    values = np.concatenate([np.sort(values[a:b]) for a, b in zip(off[:-1], off[1:])])
    return off, values


def timed(fn, args, repeat):
    fn(*args)  # warm-up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ledgers", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    expand_args = build_expand_inputs(rng, args.ledgers)
    fill_args = build_fill_inputs(rng)
    median_args = build_median_inputs(rng)
    total_days = int(expand_args[0][-1])

    backends = [load_backend("numpy"), load_backend("numba")]
    rows = []
    for name, builder in (
        (f"expand_ledger_days ({total_days / 1e6:.1f}M days)", expand_args),
        ("forward_fill (365 days x 10k reps)", fill_args),
        ("grouped_median (20k groups)", median_args),
    ):
        timings = {}
        for backend in backends:
            fn = getattr(backend, name.split(" ")[0])
            if name.startswith("forward_fill"):
                reps = 10_000
                fn(*builder)
                started = time.perf_counter()
                for _ in range(reps):
                    fn(*builder)
                timings[backend.NAME] = time.perf_counter() - started
            else:
                timings[backend.NAME] = timed(fn, builder, args.repeat)
        rows.append((name, timings["numpy"], timings["numba"]))

    print(f"{'kernel':<42} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(f"{name:<42} {t_np:>9.4f}s {t_nb:>9.4f}s {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
