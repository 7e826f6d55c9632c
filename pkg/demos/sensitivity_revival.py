"""Loss kills exponential sensitivity; tuning the loss couplings brings it back.

Sweeps the amplification factor for the noiseless chain, the Z1 loss, the
tuned loss and the tuned loss with balanced gain, and prints the normalized
SNR per photon side by side.

Run: python demos/sensitivity_revival.py
"""

import numpy as np

from nhsense import scenarios
from nhsense.conditions import check_c1, synthesize_balanced_gain
from nhsense.errors import UnstableDynamicsError
from nhsense.model import build_h_p
from nhsense.response import snr_per_photon_linear


def log10_snr(a, name=None, balanced=False):
    p = scenarios.params(a)
    z = None if name is None else scenarios.loss_template(name).materialize(a)
    y = synthesize_balanced_gain(z) if balanced and z is not None else None
    try:
        return snr_per_photon_linear(p, z, y).log10_snr_per_photon_normalized
    except UnstableDynamicsError:
        return float("nan")


def main():
    a = 2.0
    hp = build_h_p(scenarios.params(a))
    for name in ("Z1", "Z2", "tuned"):
        z = scenarios.loss_template(name).materialize(a)
        print(f"{name:6s} loss columns in span of h^P[:, 2..N]: {check_c1(z, hp).holds}")
    print()
    print(f"{'A':>4} {'ideal':>9} {'Z1':>9} {'tuned':>9} {'tuned+Y':>9}")
    for a in np.arange(0.0, 5.01, 0.5):
        vals = [log10_snr(a), log10_snr(a, "Z1"), log10_snr(a, "tuned"),
                log10_snr(a, "tuned", balanced=True)]
        print(f"{a:4.1f} " + " ".join(f"{v:9.3f}" for v in vals))
    print("\nZ1 saturates; the tuned loss tracks the noiseless curve while it stays stable,")
    print("and balanced gain keeps it stable over the whole range.")


if __name__ == "__main__":
    main()
