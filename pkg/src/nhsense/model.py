"""Core linear model of a driven nonreciprocal bosonic chain.

The chain has ``N`` sites, site 1 couples to a waveguide at rate ``kappa`` and
is driven coherently. Quadratures split into an X sector and a P sector, each
a Hatano-Nelson chain with asymmetric hopping ``J e^{+-A}``. Loss and gain
baths enter through coupling matrices ``Z`` (N x N_Z) and ``Y`` (N x N_Y).

Index convention: arrays are 0-based internally; every docstring that talks
about "site n" uses 1-based labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningError, ParameterError

#: Default cap on ``A * (N - 1)`` for numeric inversion paths.
DEFAULT_LOG_GAIN_CAP = 30.0


@dataclass(frozen=True)
class DerivedParams:
    """Hopping amplitude ``J`` and amplification factor ``A``."""

    hop_j: float
    amp_a: float


@dataclass(frozen=True)
class SensorParams:
    """Physical parameters of the sensor.

    Parameters
    ----------
    n_sites : int
        Number of cavities ``N``; odd and at least 3.
    hop_w : float
        Reciprocal hopping rate ``w`` (> 0).
    drive_delta : float
        Two-photon drive strength ``Delta`` with ``0 <= Delta < w``.
    kappa : float
        Waveguide coupling rate of site 1 (> 0).
    beta : float
        Coherent drive amplitude (>= 0).
    tau : float
        Integration time of the homodyne record (> 0).
    """

    n_sites: int
    hop_w: float
    drive_delta: float
    kappa: float
    beta: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        n = self.n_sites
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise ParameterError(f"n_sites must be an integer, got {n!r}")
        if n < 3 or n % 2 == 0:
            raise ParameterError(
                f"n_sites must be odd and >= 3 (got {n}); even chains are not supported"
            )
        for name in ("hop_w", "drive_delta", "kappa", "beta", "tau"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")
        if self.hop_w <= 0:
            raise ParameterError(f"hop_w must be positive, got {self.hop_w}")
        if self.drive_delta < 0:
            raise ParameterError(f"drive_delta must be >= 0, got {self.drive_delta}")
        if self.hop_w <= self.drive_delta:
            raise ParameterError(
                f"need hop_w > drive_delta for finite amplification "
                f"(hop_w={self.hop_w}, drive_delta={self.drive_delta})"
            )
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")

    @classmethod
    def from_hopping(cls, n_sites: int, hop_j: float, amp_a: float, kappa: float,
                     beta: float = 1.0, tau: float = 1.0) -> "SensorParams":
        """Build from ``(J, A)`` using ``w = J cosh A`` and ``Delta = J sinh A``."""
        if not hop_j > 0:
            raise ParameterError(f"hop_j must be positive, got {hop_j}")
        if not (np.isfinite(amp_a) and amp_a >= 0):
            raise ParameterError(f"amp_a must be finite and >= 0, got {amp_a}")
        return cls(n_sites, hop_j * math.cosh(amp_a), hop_j * math.sinh(amp_a),
                   kappa, beta, tau)

    @property
    def hop_j(self) -> float:
        return derive_params(self).hop_j

    @property
    def amp_a(self) -> float:
        return derive_params(self).amp_a

    @property
    def log_gain(self) -> float:
        """End-to-end amplification exponent ``A (N - 1)``."""
        return self.amp_a * (self.n_sites - 1)


def derive_params(p: SensorParams) -> DerivedParams:
    """Return ``J = sqrt(w^2 - Delta^2)`` and ``A = atanh(Delta / w)``.

    ``atanh(Delta/w)`` equals ``0.5 ln((w + Delta)/(w - Delta))`` and avoids the
    cancellation in the ratio when ``Delta`` is close to ``w``.
    """
    w, d = float(p.hop_w), float(p.drive_delta)
    if w <= d:
        raise ParameterError("amplification undefined for hop_w <= drive_delta")
    return DerivedParams(hop_j=math.sqrt((w - d) * (w + d)), amp_a=math.atanh(d / w))


def chain_matrix(n: int, hop_j: float, amp_a: float, kappa: float) -> np.ndarray:
    """Hatano-Nelson matrix ``-(kappa/2)|1><1| + sum J e^{A}|n+1><n| - J e^{-A}|n><n+1|``.

    ``amp_a`` may be negative; the P sector uses ``-A``.
    """
    h = np.zeros((n, n))
    h[0, 0] = -0.5 * kappa
    idx = np.arange(n - 1)
    h[idx + 1, idx] = hop_j * math.exp(amp_a)
    h[idx, idx + 1] = -hop_j * math.exp(-amp_a)
    return h


def build_h_x(p: SensorParams) -> np.ndarray:
    """Noiseless X-sector dynamical matrix (rightward hopping amplified)."""
    d = derive_params(p)
    return chain_matrix(p.n_sites, d.hop_j, d.amp_a, p.kappa)


def build_h_p(p: SensorParams) -> np.ndarray:
    """Noiseless P-sector dynamical matrix; ``build_h_x`` with ``A -> -A``."""
    d = derive_params(p)
    return chain_matrix(p.n_sites, d.hop_j, -d.amp_a, p.kappa)


def as_coupling(m, n_rows: int, name: str = "coupling") -> np.ndarray:
    """Coerce a coupling matrix to a float array with ``n_rows`` rows.

    ``None`` means no baths and gives an ``(n_rows, 0)`` array. A 1-D input is
    read as a single bath column.
    """
    if m is None:
        return np.zeros((n_rows, 0))
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] != n_rows:
        raise ParameterError(f"{name} must have {n_rows} rows, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} has non-finite entries")
    return a


def net_noise(Z, Y) -> np.ndarray:
    """Net drift contributed by the baths, ``Y Y^T - Z Z^T``."""
    if Z is None and Y is None:
        raise ParameterError("net_noise needs at least one of Z, Y to fix the row count")
    n = np.asarray(Z if Z is not None else Y).shape[0]
    z = as_coupling(Z, n, "Z")
    y = as_coupling(Y, n, "Y")
    return y @ y.T - z @ z.T


def bath_weight(Z, Y, n: int) -> np.ndarray:
    """Noise weight ``Y Y^T + Z Z^T`` entering the output noise."""
    z = as_coupling(Z, n, "Z")
    y = as_coupling(Y, n, "Y")
    return y @ y.T + z @ z.T


@dataclass(frozen=True, eq=False)
class CouplingTemplate:
    """Coupling matrix whose entries are ``coeff * exp(exp_mult * A)``.

    Attributes
    ----------
    coeff : ndarray, shape (N, n_baths)
        Real prefactors.
    exp_mult : ndarray of int, shape (N, n_baths)
        Integer multiples of ``A`` in the exponent.
    """

    coeff: np.ndarray
    exp_mult: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeff, dtype=float, ndmin=2)
        m = np.array(self.exp_mult, ndmin=2)
        if c.shape != m.shape:
            raise ParameterError(f"coeff shape {c.shape} != exp_mult shape {m.shape}")
        if not np.all(np.isfinite(c)):
            raise ParameterError("template coefficients must be finite")
        if not np.all(m == np.round(m)):
            raise ParameterError("exp_mult entries must be integers")
        m = m.astype(int)
        c.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "coeff", c)
        object.__setattr__(self, "exp_mult", m)

    @classmethod
    def from_pairs(cls, rows: Sequence[Sequence[Sequence[float]]], scale: float = 1.0):
        """Build from nested ``[[coeff, exp_mult], ...]`` rows."""
        arr = np.asarray(rows, dtype=float)
        if arr.size == 0:
            return cls(np.zeros((len(rows), 0)), np.zeros((len(rows), 0), dtype=int))
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ParameterError("template rows must be lists of [coeff, exp_mult] pairs")
        return cls(scale * arr[..., 0], arr[..., 1])

    @classmethod
    def from_matrix(cls, m) -> "CouplingTemplate":
        """Wrap a plain numeric matrix (all ``exp_mult = 0``)."""
        a = np.array(m, dtype=float, ndmin=2)
        return cls(a, np.zeros(a.shape, dtype=int))

    @classmethod
    def zeros(cls, n_rows: int) -> "CouplingTemplate":
        return cls(np.zeros((n_rows, 0)), np.zeros((n_rows, 0), dtype=int))

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeff.shape

    def materialize(self, amp_a: float) -> np.ndarray:
        """Numeric matrix at amplification ``amp_a``."""
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.coeff * np.exp(self.exp_mult * float(amp_a))
        out[self.coeff == 0] = 0.0
        if not np.all(np.isfinite(out)):
            raise ParameterError(f"template entries overflow at A={amp_a}")
        return out

    def scaled(self, factor: float) -> "CouplingTemplate":
        return CouplingTemplate(self.coeff * factor, self.exp_mult)

    def to_pairs(self) -> list[list[list[float]]]:
        return [[[float(c), int(m)] for c, m in zip(cr, mr)]
                for cr, mr in zip(self.coeff, self.exp_mult)]


@dataclass(frozen=True, eq=False)
class QuadratureGenerator:
    """Drift of the mean quadratures ``d<q>/dt = H q - drive``.

    ``q = (x_1..x_N, p_1..p_N)``. The perturbation couples site N of the X
    sector to site N of the P sector antisymmetrically.
    """

    mx_block: np.ndarray
    mp_block: np.ndarray
    eps: float
    drive: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.mx_block.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.n_sites

    @property
    def matrix(self) -> np.ndarray:
        n = self.n_sites
        h = np.zeros((2 * n, 2 * n))
        h[:n, :n] = self.mx_block
        h[n:, n:] = self.mp_block
        h[n - 1, 2 * n - 1] = self.eps
        h[2 * n - 1, n - 1] = -self.eps
        return h


def assemble_generator(p: SensorParams, Z=None, Y=None, eps: float = 0.0,
                       drift_offset=None) -> QuadratureGenerator:
    """Assemble the full ``2N x 2N`` generator ``H[eps]`` and the drive vector.

    Parameters
    ----------
    p : SensorParams
    Z, Y : array_like or None
        Loss and gain coupling matrices with ``N`` rows.
    eps : float
        Perturbation strength.
    drift_offset : array_like, optional
        Extra ``N x N`` drift added to both sectors. Used to model a residual
        effective coupling between distant sites in stability studies.
    """
    n = p.n_sites
    z = as_coupling(Z, n, "Z")
    y = as_coupling(Y, n, "Y")
    g = y @ y.T - z @ z.T
    if drift_offset is not None:
        off = np.asarray(drift_offset, dtype=float)
        if off.shape != (n, n):
            raise ParameterError(f"drift_offset must be {n}x{n}, got {off.shape}")
        g = g + off
    if not np.isfinite(eps):
        raise ParameterError(f"eps must be finite, got {eps}")
    drive = np.zeros(2 * n)
    drive[0] = math.sqrt(2.0 * p.kappa) * p.beta
    mx, mp = build_h_x(p) + g, build_h_p(p) + g
    if not (np.all(np.isfinite(mx)) and np.all(np.isfinite(mp))):
        raise ParameterError("generator has non-finite entries")
    return QuadratureGenerator(mx, mp, float(eps), drive)


@dataclass(frozen=True, eq=False)
class NoiseInputMap:
    """Map from independent white-noise channels into the quadrature equations.

    Column order: waveguide X, waveguide P, gain X (one per gain bath),
    gain P, loss X (one per loss bath), loss P.
    """

    matrix: np.ndarray
    n_gain: int
    n_loss: int

    #: column of the waveguide P channel
    WAVEGUIDE_P = 1

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[1]

    @property
    def labels(self) -> list[str]:
        out = ["B_X", "B_P"]
        out += [f"C{j + 1}_X" for j in range(self.n_gain)]
        out += [f"C{j + 1}_P" for j in range(self.n_gain)]
        out += [f"D{j + 1}_X" for j in range(self.n_loss)]
        out += [f"D{j + 1}_P" for j in range(self.n_loss)]
        return out


def build_noise_input_map(p: SensorParams, Z=None, Y=None) -> NoiseInputMap:
    """Noise input matrix ``L`` with the gain P block entering with a minus sign."""
    n = p.n_sites
    z = as_coupling(Z, n, "Z")
    y = as_coupling(Y, n, "Y")
    ny, nz = y.shape[1], z.shape[1]
    L = np.zeros((2 * n, 2 + 2 * ny + 2 * nz))
    rk = math.sqrt(p.kappa)
    L[0, 0] = rk
    L[n, 1] = rk
    s2 = math.sqrt(2.0)
    c = 2
    L[:n, c:c + ny] = s2 * y
    L[n:, c + ny:c + 2 * ny] = -s2 * y
    c += 2 * ny
    L[:n, c:c + nz] = s2 * z
    L[n:, c + nz:c + 2 * nz] = s2 * z
    return NoiseInputMap(L, ny, nz)


def site_log_scales(n: int, amp_a: float) -> np.ndarray:
    """``log`` of the diagonal of ``T = diag(1, e^A, ..., e^{A(N-1)})``."""
    return amp_a * np.arange(n, dtype=float)


def generator_log_scales(n: int, amp_a: float) -> np.ndarray:
    """Log scales ``s`` such that ``exp(-s) H exp(s)`` is well balanced.

    The X sector uses ``T``; the P sector uses ``e^{2A(N-1)} T^{-1}`` so that
    the perturbation entries keep magnitude ``eps`` in the balanced frame.
    """
    t = site_log_scales(n, amp_a)
    return np.concatenate([t, 2.0 * amp_a * (n - 1) - t])


def check_log_gain(p: SensorParams, cap: float = DEFAULT_LOG_GAIN_CAP) -> None:
    """Refuse numeric inversion when ``A (N - 1)`` exceeds ``cap``."""
    g = p.log_gain
    if g > cap:
        raise ConditioningError(
            f"A*(N-1) = {g:.4g} exceeds the conditioning cap {cap:g}; "
            "use the closed-form oracle (nhsense.oracle) for this regime"
        )
