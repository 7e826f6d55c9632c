"""Stability of linear drift matrices.

Two independent verdicts are offered: the spectral abscissa from a dense
eigensolve, and the Routh array built from the characteristic polynomial.
The module also evaluates the necessary bounds on a residual long-range
coupling ``gamma`` between site 1 and site N-1 (case 1) or site N (case 2).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import comb

from .errors import ParameterError
from .model import SensorParams, build_h_p, build_h_x, derive_params

#: Characteristic polynomials above this degree skip the Routh test.
ROUTH_MAX_DEGREE = 10


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """Stability verdicts for one matrix.

    ``routh_verdict`` is one of ``"stable"``, ``"unstable"``, ``"degenerate"``
    or ``None`` when the Routh test was not run.
    """

    spectral_abscissa: float
    stable: bool
    margin: float
    tol: float
    routh_verdict: str | None = None
    routh_table: np.ndarray | None = None
    char_poly: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "spectral_abscissa": self.spectral_abscissa,
            "stable": self.stable,
            "margin": self.margin,
            "tol": self.tol,
            "routh_verdict": self.routh_verdict,
            "char_poly": None if self.char_poly is None else self.char_poly.tolist(),
        }


def default_tol(M: np.ndarray) -> float:
    """``1e-9 * ||M||_inf``."""
    return 1e-9 * float(np.linalg.norm(M, np.inf))


def spectral_abscissa(M) -> float:
    """Largest real part of the eigenvalues of ``M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParameterError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue solver failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise np.linalg.LinAlgError("eigenvalue solver returned non-finite values")
    return float(ev.real.max())


def spectral_stability(M, tol: float | None = None) -> StabilityReport:
    """Spectral verdict: stable iff the abscissa is below ``-tol``."""
    M = np.asarray(M, dtype=float)
    a = spectral_abscissa(M)
    tol = default_tol(M) if tol is None else float(tol)
    return StabilityReport(spectral_abscissa=a, stable=a < -tol, margin=-a, tol=tol)


def char_poly_coeffs(M) -> np.ndarray:
    """Monic characteristic polynomial of ``M`` by Faddeev-LeVerrier.

    Returns coefficients in descending powers, ``[1, c_1, ..., c_n]``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise ParameterError(f"matrix must be square, got shape {M.shape}")
    c = np.zeros(n + 1)
    c[0] = 1.0
    Mk = np.zeros_like(M)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + c[k - 1] * eye
        c[k] = -np.trace(M @ Mk) / k
    return c


def routh_table(coeffs, tol: float = 1e-12) -> tuple[np.ndarray, str]:
    """Routh array of a polynomial given in descending powers.

    Parameters
    ----------
    coeffs : array_like
        ``[a_0, a_1, ..., a_n]`` with ``a_0 > 0`` (monic input expected).
    tol : float
        A pivot with ``|pivot| <= tol * max|coeffs|`` counts as zero.

    Returns
    -------
    table : ndarray, shape (n + 1, ceil((n + 1) / 2))
        Rows of the array; entries beyond each row's length are zero.
    verdict : str
        ``"stable"`` if the first column is strictly positive, ``"degenerate"``
        if a zero pivot is met (the array is not patched), else ``"unstable"``.
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise ParameterError("need a polynomial of degree >= 1")
    if a[0] == 0:
        raise ParameterError("leading coefficient must be nonzero")
    a = a / a[0]
    n = a.size - 1
    width = (n + 2) // 2
    tab = np.zeros((n + 1, width))
    tab[0, : len(a[0::2])] = a[0::2]
    tab[1, : len(a[1::2])] = a[1::2]
    scale = float(np.max(np.abs(a)))
    thresh = tol * scale
    if abs(tab[1, 0]) <= thresh:
        return tab, "degenerate"
    for i in range(2, n + 1):
        prev, prev2 = tab[i - 1], tab[i - 2]
        for j in range(width - 1):
            tab[i, j] = (prev[0] * prev2[j + 1] - prev2[0] * prev[j + 1]) / prev[0]
        if abs(tab[i, 0]) <= thresh:
            return tab, "degenerate"
    verdict = "stable" if np.all(tab[:, 0] > 0) else "unstable"
    return tab, verdict


def analyze_stability(M, tol: float | None = None) -> StabilityReport:
    """Spectral verdict plus the Routh array when the degree is at most 10."""
    M = np.asarray(M, dtype=float)
    spec = spectral_stability(M, tol)
    if M.shape[0] > ROUTH_MAX_DEGREE:
        return spec
    poly = char_poly_coeffs(M)
    table, verdict = routh_table(poly)
    return StabilityReport(spec.spectral_abscissa, spec.stable, spec.margin, spec.tol,
                           verdict, table, poly)


def tridiagonal_char_poly_dn(n: int, hop_j: float) -> np.ndarray:
    """``D_N = sum_k C(N-k, k) lambda^{N-2k} J^{2k}``, descending powers.

    This is ``det(lambda - h)`` for the undamped reciprocal chain.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    c = np.zeros(n + 1)
    for k in range(n // 2 + 1):
        c[2 * k] = comb(n - k, k, exact=True) * hop_j ** (2 * k)
    return c


class Case1Bound(NamedTuple):
    """Asymptotic interval ``|gamma| < bound`` and the exact quadratic roots."""

    bound: float
    gamma1: float
    gamma2: float


class Case2Bound(NamedTuple):
    """Symmetric bound ``|gamma| < bound`` and the one-sided constraints."""

    bound: float
    upper: float
    lower: float


def necessary_bound_case1(n: int, hop_j: float, amp_a: float) -> Case1Bound:
    """Necessary stability bound for a coupling between sites 1 and N-1.

    The exact roots solve ``gamma^2 - J d gamma - (N+1) J^2 / 2 = 0`` with
    ``d = e^{-A(N-2)} - e^{A(N-2)}``. For ``A (N - 2)`` of order 3 or more the
    admissible interval approaches ``|gamma| < (N+1)/2 J e^{-A(N-2)}``.
    """
    _check_odd(n)
    d = math.exp(-amp_a * (n - 2)) - math.exp(amp_a * (n - 2))
    disc = math.sqrt(d * d + 2.0 * (n + 1))
    # the root of small magnitude is evaluated from the product to avoid cancellation
    big = 0.5 * hop_j * (d + math.copysign(disc, d))
    small = -(n + 1) * hop_j ** 2 / (2.0 * big)
    g1, g2 = sorted((big, small))
    bound = 0.5 * (n + 1) * hop_j * math.exp(-amp_a * (n - 2))
    return Case1Bound(bound, g1, g2)


def necessary_bound_case2(n: int, kappa: float, amp_a: float) -> Case2Bound:
    """Necessary stability bound for a coupling between sites 1 and N.

    ``bound = kappa e^{-A(N-1)}``; the one-sided constraints are
    ``gamma < (kappa/2) / (e^{-A(N-1)} + e^{A(N-1)})`` and
    ``gamma > -kappa e^{-A(N-1)}``.
    """
    _check_odd(n)
    g = amp_a * (n - 1)
    upper = 0.5 * kappa / (math.exp(-g) + math.exp(g))
    lower = -kappa * math.exp(-g)
    return Case2Bound(kappa * math.exp(-g), upper, lower)


def coupling_offset(n: int, case: int, gamma: float) -> np.ndarray:
    """Symmetric drift ``gamma (|1><m| + |m><1|)`` with ``m = N-1`` or ``N``."""
    if case not in (1, 2):
        raise ParameterError(f"case must be 1 or 2, got {case}")
    m = n - 2 if case == 1 else n - 1
    off = np.zeros((n, n))
    off[0, m] = off[m, 0] = gamma
    return off


class ScanPoint(NamedTuple):
    gamma: float
    abscissa_x: float
    abscissa_p: float
    stable: bool


def gamma_stability_scan(p: SensorParams, case: int, gammas: Sequence[float],
                         tol: float | None = None, threads: int = 1) -> list[ScanPoint]:
    """Joint spectral verdict of both sectors with a ``gamma`` coupling added.

    Results follow the order of ``gammas`` regardless of ``threads``.
    """
    hx, hp = build_h_x(p), build_h_p(p)
    n = p.n_sites

    def one(g: float) -> ScanPoint:
        if not np.isfinite(g):
            raise ParameterError(f"gamma must be finite, got {g}")
        off = coupling_offset(n, case, g)
        rx = spectral_stability(hx + off, tol)
        rp = spectral_stability(hp + off, tol)
        return ScanPoint(float(g), rx.spectral_abscissa, rp.spectral_abscissa,
                         rx.stable and rp.stable)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, gammas))
    return [one(g) for g in gammas]


def case_bound(p: SensorParams, case: int) -> float:
    """Symmetric necessary bound for ``case`` at the parameters ``p``."""
    d = derive_params(p)
    if case == 1:
        return necessary_bound_case1(p.n_sites, d.hop_j, d.amp_a).bound
    if case == 2:
        return necessary_bound_case2(p.n_sites, p.kappa, d.amp_a).bound
    raise ParameterError(f"case must be 1 or 2, got {case}")


def _check_odd(n: int) -> None:
    if n < 3 or n % 2 == 0:
        raise ParameterError(f"N must be odd and >= 3, got {n}")
