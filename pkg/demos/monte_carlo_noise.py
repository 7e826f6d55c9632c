"""Check the analytic output noise against a stochastic simulation.

Integrates the quadrature Langevin equations for an ensemble of
trajectories and compares the sample variance of the homodyne observable
with the steady-state formula, for the noiseless, tuned-balanced and Z1
chains.

Run: python demos/monte_carlo_noise.py [n_traj]
"""

import sys

from nhsense.timedomain import TrajectoryEnsemble
from nhsense.validation import monte_carlo_check, monte_carlo_reference, reference_dt


def main(n_traj=2000):
    for kind in ("ideal", "tuned", "Z1"):
        p, z, y = monte_carlo_reference(kind)
        ens = TrajectoryEnsemble(seed=1, n_traj=n_traj, dt=reference_dt(p, z, y, None))
        r = monte_carlo_check(p, z, y, ens)
        print(f"{kind:6s} simulated {r['estimate']:.4f} +- {r['std_error']:.4f}, "
              f"analytic {r['analytic']:.4f}, z = {r['z_score']:+.2f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
