"""LQR bound for a perturbed scalar model and for the zero-noise twin of a 2-D model,
plus the random soundness sweep.

    python scripts/run_lqr.py --pairs 100
"""

import argparse
import time

import numpy as np

from mdp_approx.lqr import LqrModel, lqr_performance_bound, realized_gap
from mdp_approx.suite import run_lqr_suite


def show(title, m, m_hat, ell):
    report = lqr_performance_bound(m, m_hat, ell)
    gap = realized_gap(m, m_hat, ell, report.cert.solution, report.cert.solution_hat)
    print(f"{title}: kappa={report.kappa:.6g} rho(D*)={report.rho_d_star:.3e} "
          f"rho(D^pi)={report.rho_d_pihat:.3e} bound={report.bound:.6g} realized={gap:.6g} "
          f"[{report.status}]")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    scalar = LqrModel([[1.0]], [[1.0]], [[1.0]], [[1.0]], [[0.5]], 0.9)
    show("scalar, A_hat = A + 0.1", scalar, scalar.replace(a_mat=[[1.1]]), 0.05)

    plant = LqrModel([[0.9, 0.2], [0.0, 0.8]], [[0.0], [1.0]], np.eye(2), [[1.0]], 0.5 * np.eye(2), 0.9)
    show("2-D, noise-free twin", plant, plant.replace(sigma_w=np.zeros((2, 2))), 0.05)

    t0 = time.perf_counter()
    result = run_lqr_suite(args.pairs, args.seed)
    print(f"random sweep ({time.perf_counter() - t0:.1f}s)")
    print(result.summary())


if __name__ == "__main__":
    main()
