"""Cross-check d-separation, policy evaluation and the SAT encoding against brute force."""

import argparse
import time

from csi_imitation.oracles import dsep_suite, policy_suite, sat_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    suites = [
        ("dsep", lambda: dsep_suite(500, 20, args.seed)),
        ("policy", lambda: policy_suite(100, args.seed)),
        ("sat", lambda: sat_suite(50, args.seed)),
    ]
    for name, run in suites:
        t0 = time.perf_counter()
        rep = run()
        status = "ok" if rep.passed else f"{len(rep.mismatches)} MISMATCHES"
        print(f"{name:<7} checked={rep.checked:<6} {status}  ({time.perf_counter() - t0:.2f}s)")


if __name__ == "__main__":
    main()
