"""Randomised soundness battery over small finite model pairs.

    python scripts/run_random_suite.py --instances 200 --seed 7
"""

import argparse
import sys
import time

from mdp_approx.suite import run_random_suite


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--duality-samples", type=int, default=1000)
    args = parser.parse_args()

    t0 = time.perf_counter()
    result = run_random_suite(args.instances, args.seed, args.duality_samples)
    print(result.summary())
    print(f"{time.perf_counter() - t0:.1f}s")
    sys.exit(0 if result.passed else 1)


if __name__ == "__main__":
    main()
