"""Benchmark the compiled episode kernels against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from hetpricing._kernels import _pure
from hetpricing.instances import lb_base
from hetpricing.pricing import max_revenue

try:
    from hetpricing._kernels import _speedups
except ImportError:
    _speedups = None


def bench(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    q = lb_base(8)
    rng = np.random.default_rng(0)
    horizon = 200_000
    cum = np.cumsum(q.weights)
    idx = np.minimum(np.searchsorted(cum, rng.random(horizon), side="right"),
                     len(cum) - 1)
    vals = np.ascontiguousarray(q.values[idx])
    seeds = np.array(sorted({2.0 ** i / horizon for i in range(18)} | {1.0}))
    zoom_args = (vals, seeds, horizon, 10.0, 12.0, False, q.values, q.tail,
                 max_revenue(q), False)
    arms = np.arange(0, 101, dtype=float) * 0.01
    ucb_args = (vals, arms, horizon, q.values, q.tail, max_revenue(q))

    n_models = 400
    bank_v = np.tile(q.values, n_models)
    bank_w = np.tile(q.weights, n_models)
    bank_o = np.arange(n_models + 1, dtype=np.int64) * len(q)

    def profile_many(mod):
        for p in np.linspace(0, 1, 200):
            mod.demand_profile(bank_v, bank_w, bank_o, float(p), 0.02)

    rows = []
    for name, args, call in [
        (f"zoomv_episode (T={horizon})", zoom_args,
         lambda m, a: m.zoomv_episode(*a)),
        (f"ucb_episode (T={horizon}, 101 arms)", ucb_args,
         lambda m, a: m.ucb_episode(*a)),
        (f"demand_profile ({n_models} models x 200 prices)", None,
         lambda m, a: profile_many(m)),
    ]:
        t_pure = bench(lambda: call(_pure, args))
        if _speedups is not None:
            t_fast = bench(lambda: call(_speedups, args))
            rows.append((name, t_pure, t_fast, t_pure / t_fast))
        else:
            rows.append((name, t_pure, None, None))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'pure':>9}  {'compiled':>9}  {'speedup':>8}")
    for name, tp, tf, sp in rows:
        if tf is None:
            print(f"{name:<{width}}  {tp:8.3f}s  {'n/a':>9}  {'n/a':>8}")
        else:
            print(f"{name:<{width}}  {tp:8.3f}s  {tf:8.3f}s  {sp:7.1f}x")


if __name__ == "__main__":
    main()
