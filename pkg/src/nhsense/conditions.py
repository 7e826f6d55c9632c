"""Tunability conditions on the loss and gain couplings.

* C1: every loss column lies in the span of columns 2..N of ``h^P``.
* C2: balanced gain and loss, ``Y Y^T = Z Z^T``.
* C3: every loss column lies in the span of columns 2..N-1 of ``h^P``.
* C4: every loss column is orthogonal to row N of ``(h^X)^{-1}``.

C1 with C2 restores the noiseless linear response. C2, C3 and C4 together
restore it for a finite perturbation.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, null_space, qr

from .errors import ParameterError
from .model import CouplingTemplate, as_coupling

#: Default relative tolerance for the condition residuals.
DEFAULT_TOL = 1e-8


class ConditionResult(NamedTuple):
    holds: bool
    residual: float


@dataclass(frozen=True)
class ConditionReport:
    c1: ConditionResult
    c2: ConditionResult
    c3: ConditionResult
    c4: ConditionResult
    tol: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("c1", "c2", "c3", "c4"):
            r = getattr(self, k)
            d[k] = {"holds": bool(r.holds), "residual": float(r.residual)}
        return d


def span_basis(cols: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column span by pivoted QR.

    Columns are normalized first so that ``e^{+-A}`` scaling differences do not
    masquerade as rank deficiency.
    """
    cols = np.asarray(cols, dtype=float)
    if cols.shape[1] == 0:
        return np.zeros((cols.shape[0], 0))
    norms = np.linalg.norm(cols, axis=0)
    keep = norms > 0
    c = cols[:, keep] / norms[keep]
    if c.shape[1] == 0:
        return np.zeros((cols.shape[0], 0))
    q, r, _ = qr(c, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > rank_tol * d[0]))
    return q[:, :rank]


def _span_residual(Z: np.ndarray, basis: np.ndarray) -> float:
    if Z.shape[1] == 0:
        return 0.0
    r = Z - basis @ (basis.T @ Z)
    return float(np.linalg.norm(r) / max(1.0, np.linalg.norm(Z)))


def _check_h(h: np.ndarray, n: int, name: str) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (n, n):
        raise ParameterError(f"{name} must be {n}x{n}, got {h.shape}")
    return h


def check_c1(Z, h_p, tol: float = DEFAULT_TOL) -> ConditionResult:
    """Loss columns inside span of ``h^P`` columns 2..N."""
    h_p = np.asarray(h_p, dtype=float)
    n = h_p.shape[0]
    z = as_coupling(Z, n, "Z")
    res = _span_residual(z, span_basis(_check_h(h_p, n, "h_p")[:, 1:]))
    return ConditionResult(res <= tol, res)


def check_c3(Z, h_p, tol: float = DEFAULT_TOL) -> ConditionResult:
    """Loss columns inside span of ``h^P`` columns 2..N-1."""
    h_p = np.asarray(h_p, dtype=float)
    n = h_p.shape[0]
    z = as_coupling(Z, n, "Z")
    res = _span_residual(z, span_basis(_check_h(h_p, n, "h_p")[:, 1:n - 1]))
    return ConditionResult(res <= tol, res)


def check_c2(Y, Z, tol: float = DEFAULT_TOL) -> ConditionResult:
    """Balance ``||YY^T - ZZ^T||_F / max(1, ||ZZ^T||_F)``."""
    if Y is None and Z is None:
        return ConditionResult(True, 0.0)
    n = np.asarray(Z if Z is not None else Y).shape[0]
    y = as_coupling(Y, n, "Y")
    z = as_coupling(Z, n, "Z")
    zz = z @ z.T
    dev = float(np.linalg.norm(y @ y.T - zz) / max(1.0, np.linalg.norm(zz)))
    return ConditionResult(dev <= tol, dev)


def last_row_of_inverse(h_x) -> np.ndarray:
    """Row N of ``(h^X)^{-1}`` via ``h^T r = e_N``."""
    h_x = np.asarray(h_x, dtype=float)
    n = h_x.shape[0]
    e = np.zeros(n)
    e[-1] = 1.0
    if h_x.shape != (n, n) or not np.all(np.isfinite(h_x)):
        raise ParameterError("h_x must be a finite square matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu = lu_factor(h_x)
    if np.any(np.diag(lu[0]) == 0):
        raise ParameterError("singular h_x")
    return lu_solve(lu, e, trans=1)


def check_c4(Z, h_x, tol: float = DEFAULT_TOL) -> ConditionResult:
    """Loss columns orthogonal to row N of ``(h^X)^{-1}``.

    Residual is ``||r Z|| / (||r|| max(1, ||Z||_F))``.
    """
    h_x = np.asarray(h_x, dtype=float)
    n = h_x.shape[0]
    z = as_coupling(Z, n, "Z")
    if z.shape[1] == 0:
        return ConditionResult(True, 0.0)
    r = last_row_of_inverse(h_x)
    res = float(np.linalg.norm(r @ z) / (np.linalg.norm(r) * max(1.0, np.linalg.norm(z))))
    return ConditionResult(res <= tol, res)


def check_conditions(h_x, h_p, Z=None, Y=None, tol: float = DEFAULT_TOL) -> ConditionReport:
    """All four conditions for one configuration."""
    n = np.asarray(h_x).shape[0]
    z = as_coupling(Z, n, "Z")
    y = as_coupling(Y, n, "Y")
    return ConditionReport(check_c1(z, h_p, tol), check_c2(y, z, tol),
                           check_c3(z, h_p, tol), check_c4(z, h_x, tol), tol)


def repair_to_c1(Z, h_p) -> np.ndarray:
    """Closest C1-satisfying matrix: orthogonal projection of each column."""
    h_p = np.asarray(h_p, dtype=float)
    n = h_p.shape[0]
    z = as_coupling(Z, n, "Z")
    b = span_basis(h_p[:, 1:])
    return b @ (b.T @ z)


def synthesize_balanced_gain(Z) -> np.ndarray:
    """Gain couplings ``Y = Z``, which satisfy C2 exactly."""
    return np.array(Z, dtype=float, copy=True)


def c3_c4_basis(h_x, h_p) -> np.ndarray:
    """Orthonormal basis of columns satisfying both C3 and C4.

    The subspace is ``span(h^P columns 2..N-1)`` intersected with the
    orthogonal complement of row N of ``(h^X)^{-1}``.
    """
    b = span_basis(np.asarray(h_p, dtype=float)[:, 1:-1])
    r = last_row_of_inverse(h_x)
    r = r / np.linalg.norm(r)
    w = null_space((r @ b)[None, :])
    return b @ w


class ProbePoint(NamedTuple):
    scale: float
    value: float


def robustness_probe(template: CouplingTemplate, entries: Sequence[tuple[int, int]],
                     scales: Sequence[float], evaluate: Callable[[CouplingTemplate], float],
                     mode: str = "scale", seed: int = 0) -> list[ProbePoint]:
    """Degradation curve when selected template entries are detuned.

    Parameters
    ----------
    template : CouplingTemplate
    entries : sequence of (row, col)
        1-based template entries to perturb.
    scales : sequence of float
        ``mode="scale"`` multiplies the entries by each value (0 removes them);
        ``mode="jitter"`` adds relative Gaussian noise of that standard deviation.
    evaluate : callable
        Maps a perturbed template to a figure of merit, for instance the
        normalized SNR per photon at a fixed ``A``.
    """
    if mode not in ("scale", "jitter"):
        raise ParameterError(f"mode must be 'scale' or 'jitter', got {mode!r}")
    rng = np.random.default_rng(seed)
    out = []
    for s in scales:
        c = np.array(template.coeff)
        for (i, j) in entries:
            if mode == "scale":
                c[i - 1, j - 1] *= s
            else:
                c[i - 1, j - 1] *= 1.0 + s * rng.standard_normal()
        out.append(ProbePoint(float(s), float(evaluate(CouplingTemplate(c, template.exp_mult)))))
    return out
