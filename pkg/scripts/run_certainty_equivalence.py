"""Certainty-equivalence bound on the discretised noisy scalar system, swept over noise scale.

    python scripts/run_certainty_equivalence.py
"""

import numpy as np

from mdp_approx.ipm import ScalarNoiseSystem, certainty_equivalence_bound


def main():
    for spread in (0, 1, 2):
        values = (-spread, 0, spread) if spread else (0,)
        probs = (1 / 3,) * 3 if spread else (1.0,)
        system = ScalarNoiseSystem(noise_values=values, noise_probs=probs)
        w = np.ones(len(system.labels))
        report = certainty_equivalence_bound(system.stochastic(), system.deterministic(),
                                             system.noise_mean_norm, w, 1.0)
        print(f"noise {values}: E|N|={system.noise_mean_norm:.4g} Lip={report.terms['lip_V_hat']:.4g} "
              f"bound={report.bound:.6g} realized={report.realized:.6g}")


if __name__ == "__main__":
    main()
