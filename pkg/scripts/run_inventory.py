"""Run the inventory experiments and print a per-experiment summary.

    python scripts/run_inventory.py --out results/inventory --plots
"""

import argparse
import time
import warnings
from pathlib import Path

from mdp_approx.inventory import (APPROX_PARAMS, EXPERIMENTS, TRUE_PARAMS, ExperimentSpec,
                                  build_inventory, run_experiment)
from mdp_approx.mismatch import ModelPair
from mdp_approx.tables import write_plots


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results/inventory"))
    parser.add_argument("--plots", action="store_true")
    parser.add_argument("--experiment", choices=EXPERIMENTS, action="append")
    args = parser.parse_args()

    spec = ExperimentSpec()
    t0 = time.perf_counter()
    pair = ModelPair(build_inventory(TRUE_PARAMS), build_inventory(APPROX_PARAMS))
    print(f"solved both models in {time.perf_counter() - t0:.1f}s")
    for name in args.experiment or EXPERIMENTS:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = run_experiment(name, TRUE_PARAMS, APPROX_PARAMS, spec, pair)
        for table in result.tables:
            table.write(args.out)
            if args.plots:
                write_plots(table, args.out, zoom=spec.zoom)
        print(f"{name}: {len(result.tables)} table(s), certified={result.certified}")
        for key, value in result.tables[0].metadata.items():
            if "kappa" in key or "bound" in key or "status" in key:
                print(f"  {key} = {value}")
        for w in caught:
            print(f"  warning: {w.message}")
    print(f"done in {time.perf_counter() - t0:.1f}s, tables in {args.out}")


if __name__ == "__main__":
    main()
