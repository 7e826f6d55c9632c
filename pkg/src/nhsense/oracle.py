"""Closed-form inverse elements of the noiseless chain, used as oracles.

Nothing here calls the numeric inversion paths in :mod:`nhsense.response`.
The reciprocal chain ``h`` (``A = 0``) has an explicit inverse along its first
column, first row and last row; the nonreciprocal blocks follow from
``h^X = T h T^{-1}`` and ``h^P = T^{-1} h T`` with ``T = diag(e^{A k})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConvergenceError, DivergentSeriesError, ParameterError
from .model import SensorParams, derive_params

#: Exponents beyond this are reported in log form to avoid overflow.
LOG_HEADROOM = 700.0


def _check_odd(n: int) -> None:
    if n < 3 or n % 2 == 0:
        raise ParameterError(f"N must be odd and >= 3, got {n}")


@dataclass(frozen=True, eq=False)
class BalancedTransform:
    """``T = diag(1, e^A, ..., e^{A(N-1)})``."""

    n_sites: int
    amp_a: float

    @property
    def log_diag(self) -> np.ndarray:
        return self.amp_a * np.arange(self.n_sites, dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.diag(np.exp(self.log_diag))

    def to_x(self, h: np.ndarray) -> np.ndarray:
        """``T h T^{-1}``."""
        s = self.log_diag
        return h * np.exp(s[:, None] - s[None, :])

    def to_p(self, h: np.ndarray) -> np.ndarray:
        """``T^{-1} h T``."""
        s = self.log_diag
        return h * np.exp(s[None, :] - s[:, None])


def reciprocal_chain(n: int, hop_j: float, kappa: float) -> np.ndarray:
    """Reciprocal chain ``h``: ``-(kappa/2)`` at (1,1), ``J`` below, ``-J`` above the diagonal."""
    h = np.diag(np.full(n - 1, float(hop_j)), -1) - np.diag(np.full(n - 1, float(hop_j)), 1)
    h[0, 0] = -0.5 * kappa
    return h


def h_inverse_first_column(n: int, kappa: float) -> np.ndarray:
    """``h^{-1}_{i,1}``: ``-2/kappa`` on odd sites, 0 on even sites."""
    _check_odd(n)
    v = np.zeros(n)
    v[0::2] = -2.0 / kappa
    return v


def h_inverse_first_row(n: int, kappa: float) -> np.ndarray:
    """``h^{-1}_{1,j}``, equal to the first column.

    ``h^{-1}_{ji} = (-1)^{i+j} h^{-1}_{ij}`` and the first column vanishes on even sites.
    """
    return h_inverse_first_column(n, kappa)


def h_inverse_last_row(n: int, hop_j: float, kappa: float) -> np.ndarray:
    """``h^{-1}_{N,j}``: ``-2/kappa`` on odd sites and ``-1/J`` on even sites."""
    _check_odd(n)
    v = np.full(n, -1.0 / hop_j)
    v[0::2] = -2.0 / kappa
    return v


class LogValue(NamedTuple):
    """Real number stored as ``sign * exp(log_abs)``."""

    sign: float
    log_abs: float

    def value(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0


def scaled_inverse_element(h_inv_elem: float, i: int, j: int, amp_a: float,
                           which: str = "X", as_log: bool = False):
    """Map an element of ``h^{-1}`` to the nonreciprocal blocks.

    ``(h^X)^{-1}_{ij} = h^{-1}_{ij} e^{A(i-j)}`` and ``(h^P)^{-1}_{ij} =
    h^{-1}_{ij} e^{A(j-i)}``, 1-based ``i, j``. With ``as_log`` (or when the
    exponent exceeds the double range) a :class:`LogValue` is returned.
    """
    if which not in ("X", "P"):
        raise ParameterError(f"which must be 'X' or 'P', got {which!r}")
    expo = amp_a * ((i - j) if which == "X" else (j - i))
    if as_log or abs(expo) > LOG_HEADROOM:
        if h_inv_elem == 0:
            return LogValue(0.0, -math.inf)
        return LogValue(math.copysign(1.0, h_inv_elem), math.log(abs(h_inv_elem)) + expo)
    return h_inv_elem * math.exp(expo)


def dyson_first_order(h_x_inv: np.ndarray, h_p_inv: np.ndarray, eps: float) -> np.ndarray:
    """First-order inverse ``H1^{-1} - H1^{-1} H_N[eps] H1^{-1}`` of the full generator.

    ``H1`` is the block-diagonal part and ``H_N[eps] = eps|N><2N| - eps|2N><N|``.
    """
    n = h_x_inv.shape[0]
    g = np.zeros((2 * n, 2 * n))
    g[:n, :n] = h_x_inv
    g[n:, n:] = h_p_inv
    # H_N[eps] H1^{-1} only has rows N and 2N
    corr = eps * (np.outer(g[:, n - 1], g[2 * n - 1]) - np.outer(g[:, 2 * n - 1], g[n - 1]))
    return g - corr


def dyson_signal_element(h_x_inv: np.ndarray, h_p_inv: np.ndarray, eps: float) -> float:
    """``H^{-1}_{N+1,1} ~ eps Q^X_{N1} Q^P_{1N}`` to first order."""
    n = h_x_inv.shape[0]
    return eps * h_x_inv[n - 1, 0] * h_p_inv[0, n - 1]


def element_11_closed_form(kappa: float, eps0: float) -> float:
    """``H[eps0]^{-1}_{1,1} = -(2/kappa) / (1 + 4 eps0^2 / kappa^2)``."""
    return -(2.0 / kappa) / (1.0 + 4.0 * eps0 ** 2 / kappa ** 2)


class SeriesResult(NamedTuple):
    values: dict
    n_terms: int


def beyond_linear_series(h_inv: np.ndarray, eps0: float, amp_a: float,
                         elements: Iterable[tuple[int, int]] = ((1, 1),),
                         truncation_tol: float = 1e-16,
                         max_terms: int | None = None) -> SeriesResult:
    """Elements of ``H[eps0]^{-1}`` from the Neumann series in ``eps0``.

    In the balanced frame the generator is ``blockdiag(h, h) + eps0 K`` with
    ``K = |N><2N| - |2N><N|``; the series ``sum_k (-eps0 G K)^k G`` with
    ``G = blockdiag(h^{-1}, h^{-1})`` converges iff ``|eps0 h^{-1}_{N,N}| < 1``.

    Parameters
    ----------
    h_inv : ndarray
        Inverse of the reciprocal chain (``A = 0``).
    eps0 : float
    amp_a : float
        Restores the nonreciprocal scaling of each requested element.
    elements : iterable of (i, j)
        1-based indices into the ``2N x 2N`` inverse.
    truncation_tol : float
        Stop once a term falls below ``truncation_tol`` times the partial sum.
    max_terms : int, optional
        Hard cap on the number of terms. Defaults to a budget derived from
        the contraction ratio, so convergence slows but never stops short
        near the radius.

    Raises
    ------
    DivergentSeriesError
        If ``|eps0 h^{-1}_{N,N}| >= 1``.
    ConvergenceError
        If ``max_terms`` terms do not reach ``truncation_tol``.
    """
    n = h_inv.shape[0]
    ratio = abs(eps0 * h_inv[n - 1, n - 1])
    if ratio >= 1:
        raise DivergentSeriesError(
            f"series diverges: |eps0 h^-1_NN| = {ratio:.4g} >= 1 (need 2 eps0 / kappa < 1)")
    if max_terms is None:
        # terms shrink like ratio^k; 25% headroom covers the transient
        est = math.log(truncation_tol) / math.log(ratio) if ratio > 0 else 0.0
        max_terms = 50 + int(math.ceil(1.25 * est))
    g = np.zeros((2 * n, 2 * n))
    g[:n, :n] = h_inv
    g[n:, n:] = h_inv
    s = np.concatenate([amp_a * np.arange(n), amp_a * (2 * n - 2 - np.arange(n))])
    elements = list(elements)
    cols = sorted({j for _, j in elements})
    out, used = {}, 0
    for j in cols:
        x = g[:, j - 1].copy()
        total = x.copy()
        k = 1
        for k in range(1, max_terms):
            # K x = e_N x_{2N} - e_{2N} x_N
            x = -eps0 * (g[:, n - 1] * x[2 * n - 1] - g[:, 2 * n - 1] * x[n - 1])
            total += x
            if np.max(np.abs(x)) <= truncation_tol * np.max(np.abs(total)):
                break
        else:
            if max_terms > 1:
                raise ConvergenceError(f"series not converged after {max_terms} terms "
                                       f"(|eps0 h^-1_NN| = {ratio:.4g})")
        used = max(used, k + 1)
        for (ii, jj) in elements:
            if jj == j:
                out[(ii, jj)] = total[ii - 1] * math.exp(s[ii - 1] - s[jj - 1])
    return SeriesResult(out, used)


def row_n_plus_1_closed_form(n: int, hop_j: float, amp_a: float, kappa: float,
                             eps0: float) -> tuple[np.ndarray, np.ndarray]:
    """Row ``N+1`` of ``H[eps0]^{-1}`` for the noiseless (or balanced) chain.

    With ``f = 1 / (1 + 4 eps0^2 / kappa^2)``:

    * ``H^{-1}_{N+1,i} = -(2 eps0/kappa) h^{-1}_{N,i} f e^{A(2N-1-i)}``
    * ``H^{-1}_{N+1,N+i} = (h^{-1}_{N,i} (f - 1) + h^{-1}_{1,i}) e^{A(i-1)}``

    for ``i = 1..N``. Returns the X part and the P part of the row.
    """
    _check_odd(n)
    x = 4.0 * eps0 ** 2 / kappa ** 2
    f = 1.0 / (1.0 + x)
    # f - 1 without cancellation for small eps0
    fm1 = -x / (1.0 + x)
    last = h_inverse_last_row(n, hop_j, kappa)
    first = h_inverse_first_row(n, kappa)
    i = np.arange(1, n + 1)
    xpart = -(2.0 * eps0 / kappa) * last * f * np.exp(amp_a * (2 * n - 1 - i))
    ppart = (last * fm1 + first) * np.exp(amp_a * (i - 1))
    return xpart, ppart


def closed_form_row_elements(p: SensorParams, eps0: float) -> tuple[np.ndarray, np.ndarray]:
    """:func:`row_n_plus_1_closed_form` at the parameters ``p``.

    Requires ``2 eps0 / kappa < 1``, the convergence radius of the underlying series.
    """
    if 2.0 * abs(eps0) / p.kappa >= 1:
        raise DivergentSeriesError("closed forms need 2 eps0 / kappa < 1")
    d = derive_params(p)
    return row_n_plus_1_closed_form(p.n_sites, d.hop_j, d.amp_a, p.kappa, eps0)


def ideal_snr_normalized(n: int, kappa: float, amp_a: float) -> float:
    """Noiseless ``SNR_per_photon / (tau eps^2)`` from the closed-form elements.

    ``2 kappa (2/kappa)^4 e^{4A(N-1)}`` divided by the noise ``1/2`` and by
    ``(4/kappa^2) sum_{odd n} e^{2A(n-1)}``. For ``N = 3`` this is
    ``(16/kappa) e^{8A} / (1 + e^{4A})``.
    """
    _check_odd(n)
    odd = np.arange(0, n, 2)
    ln_ntot_over_kb2 = math.log(4.0 / kappa ** 2) + float(
        np.logaddexp.reduce(2.0 * amp_a * odd))
    ln_num = math.log(2.0 * kappa) + 4.0 * math.log(2.0 / kappa) + 4.0 * amp_a * (n - 1)
    ln_noise = math.log(0.5)
    return math.exp(ln_num - ln_noise - ln_ntot_over_kb2)
