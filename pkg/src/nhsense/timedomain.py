"""Time-domain oracles for the steady state and the output noise.

The quadrature Langevin system is simulated as the linear SDE

    dq = (M q - drive) dt - L dW,        Cov(dW) = (1/2) I dt,

with one independent Wiener process per vacuum channel. The diffusion
matrix is ``D = L L^T / 2`` and the stationary covariance solves
``M S + S M^T + D = 0``; a passively damped single mode then has variance 1/2.

The homodyne observable is the time-integrated P quadrature of the output,
``(1/sqrt(tau)) int (dW_P + sqrt(kappa) p_1 dt)``, where ``dW_P`` is the same
waveguide increment that drives the P sector.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_continuous_lyapunov

from .errors import ConvergenceError, ParameterError, UnstableDynamicsError
from .model import (NoiseInputMap, QuadratureGenerator, SensorParams, assemble_generator,
                    build_noise_input_map, generator_log_scales)
from .stability import spectral_stability

#: Trajectories simulated per independent random stream.
BLOCK_SIZE = 2000
#: Spectral spread above which the mean ODE uses an implicit integrator.
STIFF_RATIO = 1e3
#: Time steps of noise drawn per batch.
_CHUNK = 128


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """Drift ``M`` and diffusion ``D = L L^T / 2`` of the quadrature SDE."""

    drift: np.ndarray
    diffusion: np.ndarray
    noise_map: np.ndarray


def diffusion_model(gen: QuadratureGenerator, noise_map: NoiseInputMap) -> DiffusionModel:
    L = noise_map.matrix
    if L.shape[0] != gen.dim:
        raise ParameterError(f"noise map has {L.shape[0]} rows, generator dimension {gen.dim}")
    return DiffusionModel(gen.matrix, 0.5 * L @ L.T, L)


def _require_stable(M: np.ndarray, what: str) -> float:
    rep = spectral_stability(M)
    if not rep.stable:
        raise UnstableDynamicsError(
            f"unstable dynamics: {what} has spectral abscissa {rep.spectral_abscissa:.6g}",
            rep.spectral_abscissa)
    return rep.spectral_abscissa


def steady_mean_ode(gen: QuadratureGenerator, tol: float = 1e-8,
                    max_time: float | None = None) -> np.ndarray:
    """Integrate ``dq/dt = M q - drive`` from rest until ``||dq/dt|| < tol ||drive||``.

    The horizon defaults to a multiple of the slowest relaxation time (or of
    ``1/||M||`` when no mode decays); exceeding it raises
    :class:`ConvergenceError`.
    """
    M = gen.matrix
    d = gen.drive
    dn = float(np.linalg.norm(d))
    if dn == 0:
        return np.zeros(gen.dim)
    ev = np.linalg.eigvals(M)
    a = float(ev.real.max())
    # explicit high-order stepping unless the spectrum is stiff
    stiff = a >= 0 or float(np.abs(ev).max()) > STIFF_RATIO * abs(a)
    opts = {"method": "Radau", "jac": M} if stiff else {"method": "DOP853"}
    if max_time is None:
        scale = 1.0 / abs(a) if a < 0 else 1.0 / float(np.linalg.norm(M, np.inf))
        max_time = 200.0 * scale
    q = np.zeros(gen.dim)
    t, chunk = 0.0, max_time / 20.0
    while t < max_time:
        sol = solve_ivp(lambda _t, y: M @ y - d, (t, t + chunk), q, rtol=1e-12,
                        atol=1e-14 * max(1.0, dn), **opts)
        if not sol.success:
            raise ConvergenceError(f"mean ODE integration failed: {sol.message}")
        q = sol.y[:, -1]
        t += chunk
        if not np.all(np.isfinite(q)):
            break
        if np.linalg.norm(M @ q - d) < tol * dn:
            return q
    raise ConvergenceError(
        f"mean ODE did not reach a steady state within t = {max_time:.4g} "
        f"(spectral abscissa {a:.4g}); dynamics unstable or tol too tight")


def lyapunov_covariance(dm: DiffusionModel, log_scales: np.ndarray | None = None,
                        residual_tol: float = 1e-9) -> np.ndarray:
    """Stationary covariance ``S`` solving ``M S + S M^T + D = 0``.

    Parameters
    ----------
    dm : DiffusionModel
    log_scales : ndarray, optional
        Diagonal similarity ``exp(s)`` applied before solving; with the
        generator's balancing scales the solve is well conditioned even for
        strong amplification. The residual is checked in that frame.
    residual_tol : float
        Bound on ``||M S + S M^T + D|| / ||D||``.
    """
    M, D = dm.drift, dm.diffusion
    _require_stable(M, "drift")
    s = np.zeros(M.shape[0]) if log_scales is None else np.asarray(log_scales, dtype=float)
    Mb = M * np.exp(s[None, :] - s[:, None])
    Db = D * np.exp(-s[:, None] - s[None, :])
    Sb = solve_continuous_lyapunov(Mb, -Db)
    Sb = 0.5 * (Sb + Sb.T)
    dnorm = max(float(np.linalg.norm(Db)), np.finfo(float).tiny)
    res = float(np.linalg.norm(Mb @ Sb + Sb @ Mb.T + Db)) / dnorm
    if res > residual_tol:
        raise ConvergenceError(f"Lyapunov residual {res:.3g} exceeds {residual_tol:g}")
    return Sb * np.exp(s[:, None] + s[None, :])


def covariance(p: SensorParams, Z=None, Y=None, eps: float = 0.0, drift_offset=None):
    """Stationary quadrature covariance of the full model."""
    gen = assemble_generator(p, Z, Y, eps, drift_offset)
    dm = diffusion_model(gen, build_noise_input_map(p, Z, Y))
    return lyapunov_covariance(dm, generator_log_scales(p.n_sites, p.amp_a))


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Monte Carlo settings.

    Attributes
    ----------
    seed : int
        Master seed; each block of ``BLOCK_SIZE`` trajectories gets its own
        stream spawned from it, so results do not depend on thread scheduling.
    n_traj : int
    dt : float, optional
        Time step; defaults to ``0.01 / ||M||_inf``.
    t_end : float, optional
        Total simulated time; the part before the window is burn-in. Defaults
        to ``tau_window + 10 / |abscissa|``.
    tau_window : float, optional
        Length of the homodyne window; defaults to ``20 / |abscissa|``.
    """

    seed: int
    n_traj: int
    dt: float | None = None
    t_end: float | None = None
    tau_window: float | None = None

    def __post_init__(self):
        if self.n_traj < 2:
            raise ParameterError("n_traj must be at least 2")
        for name in ("dt", "t_end", "tau_window"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be positive, got {v}")


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    estimate: float
    std_error: float
    dt: float
    tau_window: float
    burn_in: float
    n_traj: int
    mean_q: np.ndarray
    mean_q_se: np.ndarray
    refined_estimate: float | None = None

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate, "std_error": self.std_error, "dt": self.dt,
            "tau_window": self.tau_window, "burn_in": self.burn_in, "n_traj": self.n_traj,
            "refined_estimate": self.refined_estimate,
        }


def _simulate_block(M, L, drive, c, n_burn, n_win, dt, b, rng, refine):
    """Run ``b`` trajectories; return window integrals and final states.

    With ``refine`` a second system steps at ``dt/2`` on the same Brownian
    path (coarse increments are sums of two fine ones).
    """
    dim, nch = L.shape
    n = dim // 2
    h = dt / 2 if refine else dt
    sub = 2 if refine else 1
    F = np.eye(dim) + h * M
    dv = (h * drive)[:, None]
    sd = math.sqrt(0.5 * h)
    q = np.zeros((dim, b))
    acc = np.zeros(b)
    if refine:
        Fc = np.eye(dim) + dt * M
        dvc = (dt * drive)[:, None]
        qc = np.zeros((dim, b))
        accc = np.zeros(b)
    total = n_burn + n_win
    step = 0
    while step < total:
        k = min(_CHUNK, total - step)
        W = rng.standard_normal((k * sub, nch, b), dtype=np.float32).astype(float)
        W *= sd
        LW = L @ W
        for t in range(k):
            in_win = step + t >= n_burn
            for u in range(sub):
                idx = t * sub + u
                if in_win:
                    acc += W[idx, 1] + (c * h) * q[n]
                q = F @ q - LW[idx] - dv
            if refine:
                Wc = W[t * 2, 1] + W[t * 2 + 1, 1]
                if in_win:
                    accc += Wc + (c * dt) * qc[n]
                qc = Fc @ qc - (LW[t * 2] + LW[t * 2 + 1]) - dvc
        step += k
    if refine:
        return accc, qc, acc
    return acc, q, None


def monte_carlo_noise_power(p: SensorParams, Z=None, Y=None,
                            ens: TrajectoryEnsemble | None = None, *, eps: float = 0.0,
                            drift_offset=None, check_dt: bool = False,
                            threads: int = 1) -> MonteCarloResult:
    """Sample variance of the homodyne observable over an Euler-Maruyama ensemble.

    Parameters
    ----------
    p, Z, Y, eps, drift_offset
        Model definition as in :func:`nhsense.model.assemble_generator`.
    ens : TrajectoryEnsemble
    check_dt : bool
        Also step the same noise realizations at ``dt/2``; raise
        :class:`ConvergenceError` if the two estimates differ by more than one
        standard error.
    threads : int
        Worker threads; results are identical for any value.

    Returns
    -------
    MonteCarloResult
        ``std_error`` is ``var * sqrt(2 / (n - 1))``, the Gaussian standard
        error of a sample variance.
    """
    if ens is None:
        ens = TrajectoryEnsemble(seed=0, n_traj=10_000)
    gen = assemble_generator(p, Z, Y, eps, drift_offset)
    M = gen.matrix
    a = _require_stable(M, "drift")
    L = build_noise_input_map(p, Z, Y).matrix
    dt = ens.dt if ens.dt is not None else 0.01 / float(np.linalg.norm(M, np.inf))
    tau = ens.tau_window if ens.tau_window is not None else 20.0 / abs(a)
    t_end = ens.t_end if ens.t_end is not None else tau + 10.0 / abs(a)
    if t_end < tau:
        raise ParameterError(f"t_end ({t_end}) shorter than tau_window ({tau})")
    n_win = max(1, int(round(tau / dt)))
    n_burn = int(round((t_end - tau) / dt))
    tau_eff = n_win * dt
    c = math.sqrt(p.kappa)

    n_blocks = -(-ens.n_traj // BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * (n_blocks - 1) + [ens.n_traj - BLOCK_SIZE * (n_blocks - 1)]
    seeds = np.random.SeedSequence(ens.seed).spawn(n_blocks)

    def run(i):
        return _simulate_block(M, L, gen.drive, c, n_burn, n_win, dt, sizes[i],
                               np.random.default_rng(seeds[i]), check_dt)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, range(n_blocks)))
    else:
        parts = [run(i) for i in range(n_blocks)]

    obs = np.concatenate([pt[0] for pt in parts]) / math.sqrt(tau_eff)
    qf = np.concatenate([pt[1] for pt in parts], axis=1)
    n = obs.size
    est = float(np.var(obs, ddof=1))
    se = est * math.sqrt(2.0 / (n - 1))
    refined = None
    if check_dt:
        fine = np.concatenate([pt[2] for pt in parts]) / math.sqrt(tau_eff)
        refined = float(np.var(fine, ddof=1))
        if abs(refined - est) > se:
            raise ConvergenceError(
                f"dt too coarse: halving dt moved the estimate from {est:.6g} to "
                f"{refined:.6g} (std error {se:.3g})")
    return MonteCarloResult(
        estimate=est, std_error=se, dt=dt, tau_window=tau_eff, burn_in=n_burn * dt,
        n_traj=n, mean_q=qf.mean(axis=1), mean_q_se=qf.std(axis=1, ddof=1) / math.sqrt(n),
        refined_estimate=refined,
    )


def finite_window_bias(p: SensorParams, Z=None, Y=None, tau: float = 1.0, *,
                       eps: float = 0.0, drift_offset=None) -> float:
    """Leading finite-window correction to the stationary noise power.

    For a stationary record of length ``tau`` the variance of the homodyne
    observable is ``noise - K / tau + O(e^{-tau/t_relax})`` with
    ``K = 2 c^T M^{-2} (S c - L e_P / 2)``, ``c = sqrt(kappa) e_{N+1}`` and ``S``
    the stationary covariance. Returns ``-K / tau``. Useful for choosing a
    window long enough that the Monte Carlo estimate is unbiased at the
    level of its standard error.
    """
    gen = assemble_generator(p, Z, Y, eps, drift_offset)
    M = gen.matrix
    nmap = build_noise_input_map(p, Z, Y)
    S = lyapunov_covariance(diffusion_model(gen, nmap), generator_log_scales(p.n_sites, p.amp_a))
    n = p.n_sites
    cvec = np.zeros(2 * n)
    cvec[n] = math.sqrt(p.kappa)
    u = np.linalg.solve(M.T, np.linalg.solve(M.T, cvec))
    k = 2.0 * float(u @ (S @ cvec - 0.5 * nmap.matrix[:, NoiseInputMap.WAVEGUIDE_P]))
    return -k / tau
