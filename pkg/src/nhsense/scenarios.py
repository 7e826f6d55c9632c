"""Reference three-site scenarios with two loss baths.

The hopping amplitude follows ``J = omega * 2 e^A / (e^{2A} + 1) = omega sech A``
so that ``w = omega`` stays fixed while ``Delta = omega tanh A`` grows with
``A``.
"""

from __future__ import annotations

import math

from .model import CouplingTemplate, SensorParams

OMEGA = 1.0e5
KAPPA = 10.0
ALPHA = 0.5

# Rows are sites, columns are loss baths; each entry is (coeff, exp_mult).
_Z1 = [[(-1, 1), (-1, 1)],
       [(0, 0), (1, 0)],
       [(1, -1), (0, 0)]]
_Z2 = [[(-1, 1), (0, 0)],
       [(0, 0), (1, 0)],
       [(1, -1), (1, -1)]]
_TUNED = [[(-1, 1), (-1, 1)],
          [(0, 0), (1, 0)],
          [(1, -1), (1, -1)]]

_TEMPLATES = {"Z1": _Z1, "Z2": _Z2, "tuned": _TUNED}


def loss_template(name: str, alpha: float = ALPHA) -> CouplingTemplate:
    """Loss template ``"Z1"``, ``"Z2"`` or ``"tuned"`` scaled by ``alpha``.

    ``"tuned"`` is ``Z1`` with the extra exponentially small entry at
    (site 3, bath 2); its columns lie in the span of the P-sector hopping
    columns, which is what restores the noiseless response.
    """
    try:
        rows = _TEMPLATES[name]
    except KeyError:
        raise KeyError(f"unknown template {name!r}; choose from {sorted(_TEMPLATES)}")
    return CouplingTemplate.from_pairs(rows, scale=alpha)


def hopping(amp_a: float, omega: float = OMEGA) -> float:
    """``J = omega * 2 e^A / (e^{2A} + 1)``."""
    return omega / math.cosh(amp_a)


def params(amp_a: float, n_sites: int = 3, kappa: float = KAPPA, omega: float = OMEGA,
           beta: float = 1.0, tau: float = 1.0) -> SensorParams:
    """Sensor with ``w = omega`` and ``Delta = omega tanh A``."""
    return SensorParams(n_sites, omega, omega * math.tanh(amp_a), kappa, beta, tau)
