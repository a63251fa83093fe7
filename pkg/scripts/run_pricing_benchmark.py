"""Pricing benchmark: expert vs cloning baselines vs the surrogate-based policy.

Runs exact enumeration, then one finite-sample repetition per seed.

    python3 scripts/run_pricing_benchmark.py --samples 100000 --seeds 0 1 2
"""

import argparse
import json
import os

import numpy as np

from csi_imitation.bench import run_sales_benchmark

ALGOS = ("expert", "naive_marginal", "naive_conditional", "surrogate_policy")


def _table(report, title):
    print(title)
    print(f"  {'algorithm':<18} {'E[Y]':>8} {'KL(reward)':>11}")
    for name in ALGOS:
        m = report.metrics.get(name, {})
        if "expected_reward" in m:
            print(f"  {name:<18} {m['expected_reward']:>8.4f} {m['kl_reward']:>11.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    exact = run_sales_benchmark()
    _table(exact, "exact enumeration")
    reports = [exact.to_dict()]

    kls = {name: [] for name in ALGOS[1:]}
    for seed in args.seeds:
        rep = run_sales_benchmark(args.samples, seed, exact=False)
        _table(rep, f"n={args.samples} seed={seed} ({rep.runtime_s:.3f}s)")
        for name in kls:
            if "policy_kl" in rep.metrics[name]:
                kls[name].append(list(rep.metrics[name]["policy_kl"].values()))
        reports.append(rep.to_dict())

    print("policy estimation KL, mean over seeds (per value of T)")
    for name, vals in kls.items():
        if vals:
            print(f"  {name:<18} {np.round(np.mean(vals, axis=0), 6).tolist()}")

    with open(os.path.join(args.out, "pricing_benchmark.json"), "w") as fh:
        json.dump(reports, fh, indent=2)


if __name__ == "__main__":
    main()
