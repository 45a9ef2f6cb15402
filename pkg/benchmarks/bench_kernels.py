"""Compare the compiled and pure-Python kernels on the hot paths.

    python benchmarks/bench_kernels.py [--repeat 5]

Times one day of the windowed scaler (288 slots, several windows), a
batch of price lookups, and the oracle's dynamic program.
"""
import argparse
import time

import numpy as np

from brokerscale import kernels
from brokerscale.demand_model import CurveSpec, synthesize_curve
from brokerscale.oracle import loss_table
from brokerscale.trace import generate_spiky_trace


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    curve = synthesize_curve(CurveSpec(1 / 12, 0.8, 0.3, 12, seed=1))
    gam, rat, tb = curve.kernel_args
    trace = generate_spiky_trace(1, 288, 30, 0.05, 30, spike_len=2, noise=1).slots
    s = np.random.default_rng(0).uniform(0, 1, 20_000)
    demand = np.array([3, 1, 2, 3, 0, 2, 3, 1, 2, 3, 3, 1], dtype=float)
    table = loss_table(curve, demand, 3)

    def online(mod, g, r):
        return lambda: [mod.run_online(g, r, tb, trace, 12, w, 1.0) for w in (0, 4, 8)]

    def prices(mod, g, r):
        return lambda: [mod.price(g, r, tb, x) for x in s]

    def dp(mod):
        return lambda: mod.dp_solve(table, 6, 3, 1.0, 1e-12)

    return [("scaler: 288 slots x 3 windows", online), ("price: 20k lookups", prices),
            ("dp: T=12, tau=6, d_max=3", dp)], (gam, rat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = kernels.available()
    table, (gam, rat) = cases()
    print(f"backends: {', '.join(names)}")
    print(f"{'case':<32}" + "".join(f"{n:>12}" for n in names) + "   speedup")
    for label, make in table:
        row = {}
        for name in names:
            mod = kernels.get(name)
            if make.__name__ == "dp":
                fn = make(mod)
            elif name == "python":
                fn = make(mod, gam.tolist(), rat.tolist())
            else:
                fn = make(mod, gam, rat)
            row[name] = best_of(fn, args.repeat)
        speed = (f"{row['python'] / row['cython']:8.1f}x"
                 if "cython" in row and row["cython"] > 0 else "       -")
        print(f"{label:<32}" + "".join(f"{row[n] * 1e3:>10.2f}ms" for n in names) + "  " + speed)


if __name__ == "__main__":
    main()
