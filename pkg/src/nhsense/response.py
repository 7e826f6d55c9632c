"""Steady states, signal and noise powers, photon number and SNR per photon.

All inversions run in a balanced frame. With ``T = diag(e^{A k})`` the
similarity ``T^{-1} (h^X + G) T`` removes the ``e^{+-A}`` hopping asymmetry, so
the LU factorization sees an O(1)-conditioned matrix; the exponential factors
are restored exactly afterwards as ``exp(s_i - s_j)``. Residuals are checked
in the balanced frame, where they are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import logsumexp

from .errors import (ConditioningError, ParameterError, UnstableDynamicsError,
                     ZeroPhotonError)
from .model import (DEFAULT_LOG_GAIN_CAP, SensorParams, as_coupling, assemble_generator,
                    bath_weight, check_log_gain, generator_log_scales, site_log_scales)
from .stability import spectral_stability

#: Maximum allowed ``||B X - I||_max`` of a balanced-frame inverse.
RESIDUAL_TOL = 1e-9


def _balance(M: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``exp(-s) M exp(s)`` entrywise, i.e. ``M_ij e^{s_j - s_i}``."""
    return M * np.exp(s[None, :] - s[:, None])


def _log_abs(x: float) -> float:
    return math.log(abs(x)) if x != 0 else -math.inf


def _checked_inverse(B: np.ndarray, what: str, stability_tol: float | None) -> np.ndarray:
    rep = spectral_stability(B, stability_tol)
    if not rep.stable:
        raise UnstableDynamicsError(
            f"unstable dynamics: {what} has spectral abscissa "
            f"{rep.spectral_abscissa:.6g} >= -{rep.tol:.3g}; no steady state exists",
            rep.spectral_abscissa,
        )
    lu = lu_factor(B, check_finite=True)
    X = lu_solve(lu, np.eye(B.shape[0]))
    res = float(np.max(np.abs(B @ X - np.eye(B.shape[0]))))
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise ConditioningError(f"{what}: inverse residual {res:.3g} exceeds {RESIDUAL_TOL:g}")
    return X


@dataclass(frozen=True, eq=False)
class InformationMatrices:
    """``Q^X = (h^X + G)^{-1}`` and ``Q^P = (h^P + G)^{-1}`` with ``G = YY^T - ZZ^T``.

    ``bal_x`` and ``bal_p`` hold the balanced-frame inverses; ``Q^X_ij =
    bal_x_ij e^{A(i-j)}`` and ``Q^P_ij = bal_p_ij e^{A(j-i)}``.
    """

    q_x: np.ndarray
    q_p: np.ndarray
    bal_x: np.ndarray
    bal_p: np.ndarray
    amp_a: float
    residual: float

    @property
    def n_sites(self) -> int:
        return self.q_x.shape[0]

    def log_abs_x(self, i: int, j: int) -> float:
        """``ln |Q^X_ij|`` for 0-based indices, free of overflow."""
        return _log_abs(self.bal_x[i, j]) + self.amp_a * (i - j)

    def log_abs_p(self, i: int, j: int) -> float:
        """``ln |Q^P_ij|`` for 0-based indices, free of overflow."""
        return _log_abs(self.bal_p[i, j]) + self.amp_a * (j - i)


def information_matrices(p: SensorParams, Z=None, Y=None, *, drift_offset=None,
                         log_gain_cap: float = DEFAULT_LOG_GAIN_CAP,
                         stability_tol: float | None = None) -> InformationMatrices:
    """Invert both sector generators at ``eps = 0``.

    Raises
    ------
    UnstableDynamicsError
        If either sector has a spectral abscissa at or above ``-tol``.
    ConditioningError
        If ``A (N - 1)`` exceeds ``log_gain_cap`` or the residual check fails.
    """
    check_log_gain(p, log_gain_cap)
    gen = assemble_generator(p, Z, Y, 0.0, drift_offset)
    a = p.amp_a
    t = site_log_scales(p.n_sites, a)
    bx = _balance(gen.mx_block, t)
    bp = _balance(gen.mp_block, -t)
    xi = _checked_inverse(bx, "X-sector generator", stability_tol)
    pi = _checked_inverse(bp, "P-sector generator", stability_tol)
    d = t[:, None] - t[None, :]
    qx = xi * np.exp(d)
    qp = pi * np.exp(-d)
    n = p.n_sites
    res = max(float(np.max(np.abs(bx @ xi - np.eye(n)))),
              float(np.max(np.abs(bp @ pi - np.eye(n)))))
    return InformationMatrices(qx, qp, xi, pi, a, res)


def signal_power_linear(p: SensorParams, im: InformationMatrices, eps: float) -> float:
    """``2 eps^2 kappa^2 beta^2 tau |Q^X_{N1}|^2 |Q^P_{1N}|^2``."""
    n = p.n_sites
    if eps == 0 or p.beta == 0:
        return 0.0
    log_s = (math.log(2.0 * p.tau) + 2.0 * math.log(abs(eps) * p.kappa * p.beta)
             + 2.0 * im.log_abs_x(n - 1, 0) + 2.0 * im.log_abs_p(0, n - 1))
    return math.exp(log_s)


def noise_power_linear(p: SensorParams, im: InformationMatrices, Z=None, Y=None) -> float:
    """``0.5 (1 + kappa Q^P_11)^2 + kappa [Q^P (YY^T + ZZ^T) Q^P^T]_11``."""
    n = p.n_sites
    w = bath_weight(Z, Y, n)
    row = im.q_p[0]
    return 0.5 * (1.0 + p.kappa * row[0]) ** 2 + p.kappa * float(row @ w @ row)


def n_tot_linear(p: SensorParams, im: InformationMatrices) -> float:
    """Intracavity photon number ``kappa beta^2 sum_n (Q^X_{n1})^2``."""
    if p.beta == 0:
        return 0.0
    return p.kappa * p.beta ** 2 * float(np.sum(im.q_x[:, 0] ** 2))


def _log_sum_col_sq(bal: np.ndarray, log_scale: np.ndarray) -> float:
    """``ln sum_n (bal_n e^{log_scale_n})^2`` without overflow."""
    mask = bal != 0
    return float(logsumexp(2.0 * (np.log(np.abs(bal[mask])) + log_scale[mask])))


@dataclass(frozen=True)
class SensingReport:
    """Figures of merit for one configuration.

    ``log10_snr_per_photon_normalized`` is ``log10(SNR_per_photon / (tau eps^2))``.
    In the linear regime it does not depend on ``eps`` and is reported even
    when ``eps = 0``.
    """

    signal: float
    noise: float
    n_tot: float
    snr: float
    snr_per_photon: float
    log10_snr_per_photon_normalized: float
    regime: str
    stable: bool
    eps: float
    method: str

    def to_dict(self) -> dict:
        return asdict(self)


def snr_per_photon_linear(p: SensorParams, Z=None, Y=None, eps: float = 1e-3, *,
                          drift_offset=None, log_gain_cap: float = DEFAULT_LOG_GAIN_CAP,
                          stability_tol: float | None = None) -> SensingReport:
    """Linear-response sensing report.

    The normalized figure of merit is assembled in log space so that it stays
    accurate when the raw signal would overflow.
    """
    if p.beta == 0:
        raise ZeroPhotonError("zero-photon drive: beta = 0 leaves SNR per photon undefined")
    im = information_matrices(p, Z, Y, drift_offset=drift_offset,
                              log_gain_cap=log_gain_cap, stability_tol=stability_tol)
    n = p.n_sites
    noise = noise_power_linear(p, im, Z, Y)
    ntot = n_tot_linear(p, im)
    signal = signal_power_linear(p, im, eps)
    t = site_log_scales(n, im.amp_a)
    log_ntot_over_kb2 = _log_sum_col_sq(im.bal_x[:, 0], t)
    # SNR / (tau eps^2) = 2 kappa^2 beta^2 |Q^X_N1|^2 |Q^P_1N|^2 / (noise n_tot)
    ln_norm = (math.log(2.0 * p.kappa) + 2.0 * im.log_abs_x(n - 1, 0)
               + 2.0 * im.log_abs_p(0, n - 1) - math.log(noise) - log_ntot_over_kb2)
    snr = signal / noise
    return SensingReport(
        signal=signal, noise=noise, n_tot=ntot, snr=snr,
        snr_per_photon=snr / ntot,
        log10_snr_per_photon_normalized=ln_norm / math.log(10.0),
        regime="linear", stable=True, eps=float(eps),
        method="balanced-frame LU, linear response",
    )


@dataclass(frozen=True, eq=False)
class GeneratorInverse:
    """Inverse of the full generator ``H[eps]`` with its balanced-frame factor."""

    inverse: np.ndarray
    balanced: np.ndarray
    log_scales: np.ndarray
    eps: float

    def log_abs(self, i: int, j: int) -> float:
        return _log_abs(self.balanced[i, j]) + self.log_scales[i] - self.log_scales[j]


def generator_inverse(p: SensorParams, Z=None, Y=None, eps: float = 0.0, *,
                      drift_offset=None, log_gain_cap: float = DEFAULT_LOG_GAIN_CAP,
                      stability_tol: float | None = None) -> GeneratorInverse:
    """``H[eps]^{-1}`` through a balanced LU factorization of the full generator."""
    check_log_gain(p, log_gain_cap)
    gen = assemble_generator(p, Z, Y, eps, drift_offset)
    s = generator_log_scales(p.n_sites, p.amp_a)
    B = _balance(gen.matrix, s)
    X = _checked_inverse(B, f"generator H[eps={eps:g}]", stability_tol)
    return GeneratorInverse(X * np.exp(s[:, None] - s[None, :]), X, s, float(eps))


def steady_state_mean(p: SensorParams, Z=None, Y=None, eps: float = 0.0, *,
                      drift_offset=None, log_gain_cap: float = DEFAULT_LOG_GAIN_CAP,
                      stability_tol: float | None = None) -> np.ndarray:
    """Mean quadratures ``q`` solving ``H[eps] q = drive`` (no explicit inverse)."""
    check_log_gain(p, log_gain_cap)
    gen = assemble_generator(p, Z, Y, eps, drift_offset)
    s = generator_log_scales(p.n_sites, p.amp_a)
    B = _balance(gen.matrix, s)
    rep = spectral_stability(B, stability_tol)
    if not rep.stable:
        raise UnstableDynamicsError(
            f"unstable dynamics: spectral abscissa {rep.spectral_abscissa:.6g}; "
            "no steady state exists", rep.spectral_abscissa)
    rhs = gen.drive * np.exp(-s)
    try:
        y = lu_solve(lu_factor(B), rhs)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConditioningError(f"singular generator: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise ConditioningError("singular generator: non-finite steady state")
    return y * np.exp(s)


def _noise_at(p: SensorParams, hinv: np.ndarray, w: np.ndarray) -> float:
    """Output noise power for the full-generator inverse ``hinv``.

    ``0.5 {kappa^2 (H^-1_{N+1,1})^2 + (1 + kappa H^-1_{N+1,N+1})^2
    + 2 kappa [H^-1 diag(W, W) H^-T]_{N+1,N+1}}`` with ``W = YY^T + ZZ^T``.
    At ``eps = 0`` this equals ``noise_power_linear``.
    """
    n = p.n_sites
    k = p.kappa
    row = hinv[n]
    rx, rp = row[:n], row[n:]
    bath = float(rx @ w @ rx + rp @ w @ rp)
    return 0.5 * ((k * row[0]) ** 2 + (1.0 + k * row[n]) ** 2 + 2.0 * k * bath)


def _n_tot_at(p: SensorParams, hinv: np.ndarray) -> float:
    return p.kappa * p.beta ** 2 * float(np.sum(hinv[:, 0] ** 2))


def signal_power_beyond(p: SensorParams, Z=None, Y=None, eps0: float = 1e-3, **kw) -> float:
    """``2 tau kappa^2 beta^2 |H[eps0]^-1_{N+1,1} - H[0]^-1_{N+1,1}|^2`` to all orders."""
    n = p.n_sites
    h0 = generator_inverse(p, Z, Y, 0.0, **kw).inverse
    he = generator_inverse(p, Z, Y, eps0, **kw).inverse
    return 2.0 * p.tau * (p.kappa * p.beta) ** 2 * (he[n, 0] - h0[n, 0]) ** 2


def noise_power_beyond(p: SensorParams, Z=None, Y=None, eps0: float = 1e-3, **kw) -> float:
    """Average of the output noise at ``eps = 0`` and ``eps = eps0``."""
    n = p.n_sites
    w = bath_weight(Z, Y, n)
    h0 = generator_inverse(p, Z, Y, 0.0, **kw).inverse
    he = generator_inverse(p, Z, Y, eps0, **kw).inverse
    return 0.5 * (_noise_at(p, h0, w) + _noise_at(p, he, w))


def snr_beyond(p: SensorParams, Z=None, Y=None, eps0: float = 1e-3, **kw) -> SensingReport:
    """Sensing report for a finite perturbation ``eps0``.

    ``noise`` and ``n_tot`` are averages of their values at ``0`` and ``eps0``;
    ``snr_per_photon = signal / (noise n_tot)``.
    """
    if p.beta == 0:
        raise ZeroPhotonError("zero-photon drive: beta = 0 leaves SNR per photon undefined")
    if eps0 == 0:
        raise ParameterError("eps0 must be nonzero beyond linear response")
    n = p.n_sites
    w = bath_weight(as_coupling(Z, n, "Z"), as_coupling(Y, n, "Y"), n)
    g0 = generator_inverse(p, Z, Y, 0.0, **kw)
    ge = generator_inverse(p, Z, Y, eps0, **kw)
    h0, he = g0.inverse, ge.inverse
    noise = 0.5 * (_noise_at(p, h0, w) + _noise_at(p, he, w))
    ntot = 0.5 * (_n_tot_at(p, h0) + _n_tot_at(p, he))
    diff = he[n, 0] - h0[n, 0]
    signal = 2.0 * p.tau * (p.kappa * p.beta) ** 2 * diff ** 2
    snr = signal / noise
    spp = signal / (noise * ntot)
    log_norm = math.log10(spp / (p.tau * eps0 ** 2)) if spp > 0 else -math.inf
    return SensingReport(
        signal=signal, noise=noise, n_tot=ntot, snr=snr, snr_per_photon=spp,
        log10_snr_per_photon_normalized=log_norm, regime="beyond_linear",
        stable=True, eps=float(eps0), method="balanced-frame LU, all orders in eps0",
    )
