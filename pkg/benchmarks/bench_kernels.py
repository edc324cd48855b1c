"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--users 20] [--aps 5] [--repeat 5]

Each stage is timed on the same instance with both backends, and the outputs
are checked for agreement before any number is printed.
"""
import argparse
import time

import numpy as np

from wlanmatch import kernels
from wlanmatch.loadbalance import compute_quotas
from wlanmatch.mac80211 import MacConfig, WorthTable
from wlanmatch.matching import PreferenceProfile, bdaa, coalition_scores, SharingRule
from wlanmatch.control import ControlSpec
from wlanmatch.model import CoalitionFamily
from wlanmatch.pipeline import generate_random


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=20)
    ap.add_argument("--aps", type=int, default=5)
    ap.add_argument("--area", type=float, default=75.0)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not available; only the python backend will be timed")
    sc = generate_random(args.users, args.aps, args.area, args.seed)
    rates = sc.rates
    q = compute_quotas(rates)
    family = CoalitionFamily.build(rates, q.caps)
    control = ControlSpec.gaussian(q.qhat, 0.3)
    print(f"instance: {args.users} users, {args.aps} APs, {len(family)} coalitions, caps {q.caps}")

    results = {}
    for name, impl in impls.items():
        t_worth, base = best_of(lambda: WorthTable(rates, MacConfig(), impl=impl).worths(family), args.repeat)
        log_chi, us, aps, _ = coalition_scores(family, base, control, SharingRule())
        t_prof, prof = best_of(lambda: PreferenceProfile.from_scores(family, log_chi, us, aps, impl=impl),
                               args.repeat)
        t_bdaa, res = best_of(lambda: bdaa(prof, record_trace=False, impl=impl), args.repeat)
        results[name] = (t_worth, t_prof, t_bdaa, base, res.coalition_ids)

    ref = results["python"]
    for name, r in results.items():
        if not np.allclose(r[3], ref[3], rtol=1e-12) or r[4] != ref[4]:
            raise SystemExit(f"backend {name} disagrees with the python backend")

    print(f"{'backend':<8} {'worths':>10} {'profile':>10} {'bdaa':>10}")
    for name, (tw, tp, tb, _, _) in results.items():
        print(f"{name:<8} {tw * 1e3:>8.2f}ms {tp * 1e3:>8.2f}ms {tb * 1e3:>8.2f}ms")
    if "cython" in results:
        c, p = results["cython"], results["python"]
        print("speedup  " + " ".join(f"{p[i] / c[i]:>9.1f}x" for i in range(3)))


if __name__ == "__main__":
    main()
