"""Oracle-versus-numeric validation matrix.

Each check compares a closed-form value from :mod:`nhsense.oracle` (which
never touches the numeric inversion code) with the corresponding quantity
from :mod:`nhsense.response` or :mod:`nhsense.timedomain`. A failing check
points at the numeric path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from . import oracle, scenarios
from .model import SensorParams, assemble_generator
from .response import (generator_inverse, information_matrices, noise_power_linear,
                       snr_per_photon_linear, steady_state_mean)
from .timedomain import (MonteCarloResult, TrajectoryEnsemble, monte_carlo_noise_power,
                         steady_mean_ode)

#: Default relative tolerance of the matrix.
DEFAULT_TOL = 1e-9

#: Reference chains ``(N, A)`` with ``A (N - 1) <= 12``.
REFERENCE_CHAINS = ((3, 0.0), (3, 1.0), (3, 3.0), (5, 0.5), (5, 2.0), (7, 1.0), (7, 2.0))
REFERENCE_KAPPA = 10.0
REFERENCE_J = 1.5
REFERENCE_EPS_RATIOS = (1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class ValidationCheck:
    """One row of the validation table."""

    name: str
    closed_form: float
    numeric: float
    rel_err: float
    tol: float
    passed: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _compare(name: str, cf: float, num: float, tol: float, floor: float = 0.0) -> ValidationCheck:
    """Relative error against ``max(|cf|, floor)``; ``floor`` covers exact zeros."""
    denom = max(abs(cf), floor)
    err = abs(num - cf) / denom if denom > 0 else abs(num - cf)
    ok = bool(np.isfinite(num) and err <= tol)
    return ValidationCheck(name, float(cf), float(num), float(err), tol, ok)


def _guarded(names_cf: list[tuple[str, float]], tol: float,
             fn: Callable[[], list[ValidationCheck]]):
    """Run ``fn``; on an exception mark every expected check as failed."""
    try:
        return fn()
    except Exception as exc:  # the table must list the failure, not abort
        msg = f"{type(exc).__name__}: {exc}"
        return [ValidationCheck(n, float(c), math.nan, math.inf, tol, False, msg)
                for n, c in names_cf]


def _vector_checks(label: str, tag: str, idx: Iterable[tuple[int, int]], cf: np.ndarray,
                   num: np.ndarray, log_scale: np.ndarray, unit: float, tol: float):
    """Elementwise checks; zeros are judged on the magnitude ``unit * e^{log_scale}``."""
    out = []
    for k, (i, j) in enumerate(idx):
        floor = unit * math.exp(log_scale[k])
        out.append(_compare(f"{label}[{i},{j}] {tag}", cf[k], num[k], tol, floor))
    return out


def chain_checks(n: int, amp_a: float, kappa: float = REFERENCE_KAPPA,
                 hop_j: float = REFERENCE_J, tol: float = DEFAULT_TOL) -> list[ValidationCheck]:
    """Noiseless inverse elements, noise power and normalized SNR of one chain."""
    p = SensorParams.from_hopping(n, hop_j, amp_a, kappa)
    tag = f"N={n} A={amp_a:g}"
    k = np.arange(1, n + 1)
    unit = 2.0 / kappa
    first_col = oracle.h_inverse_first_column(n, kappa)
    first_row = oracle.h_inverse_first_row(n, kappa)
    last_row = oracle.h_inverse_last_row(n, hop_j, kappa)
    cf_col = first_col * np.exp(amp_a * (k - 1))
    cf_row = first_row * np.exp(amp_a * (k - 1))
    cf_last = last_row * np.exp(amp_a * (n - k))
    ideal = oracle.ideal_snr_normalized(n, kappa, amp_a)
    expect = ([(f"Qx[{i},1] {tag}", c) for i, c in zip(k, cf_col)]
              + [(f"Qp[1,{j}] {tag}", c) for j, c in zip(k, cf_row)]
              + [(f"Qx[{n},{j}] {tag}", c) for j, c in zip(k, cf_last)]
              + [(f"noise {tag}", 0.5), (f"log10_norm {tag}", math.log10(ideal))])

    def run():
        im = information_matrices(p)
        out = _vector_checks("Qx", tag, [(i, 1) for i in k], cf_col, im.q_x[:, 0],
                             amp_a * (k - 1), unit, tol)
        out += _vector_checks("Qp", tag, [(1, j) for j in k], cf_row, im.q_p[0],
                              amp_a * (k - 1), unit, tol)
        out += _vector_checks("Qx", tag, [(n, j) for j in k], cf_last, im.q_x[n - 1],
                              amp_a * (n - k), max(unit, 1.0 / hop_j), tol)
        out.append(_compare(f"noise {tag}", 0.5, noise_power_linear(p, im), tol))
        rep = snr_per_photon_linear(p)
        out.append(_compare(f"log10_norm {tag}", math.log10(ideal),
                            rep.log10_snr_per_photon_normalized, tol))
        return out

    return _guarded(expect, tol, run)


def beyond_linear_checks(n: int, amp_a: float, eps_ratio: float, kappa: float = REFERENCE_KAPPA,
                         hop_j: float = REFERENCE_J,
                         tol: float = DEFAULT_TOL) -> list[ValidationCheck]:
    """``H[eps0]^{-1}`` element (1,1), the series value and row ``N+1``."""
    p = SensorParams.from_hopping(n, hop_j, amp_a, kappa)
    eps0 = eps_ratio * kappa
    tag = f"N={n} A={amp_a:g} eps0/kappa={eps_ratio:g}"
    e11 = oracle.element_11_closed_form(kappa, eps0)
    xpart, ppart = oracle.row_n_plus_1_closed_form(n, hop_j, amp_a, kappa, eps0)
    i = np.arange(1, n + 1)
    expect = ([(f"H^-1[1,1] {tag}", e11), (f"series H^-1[1,1] {tag}", e11)]
              + [(f"H^-1[{n + 1},{j}] {tag}", c) for j, c in zip(i, xpart)]
              + [(f"H^-1[{n + 1},{n + j}] {tag}", c) for j, c in zip(i, ppart)])

    def run():
        hinv = generator_inverse(p, eps=eps0).inverse
        h0 = oracle.reciprocal_chain(n, hop_j, kappa)
        ser = oracle.beyond_linear_series(np.linalg.inv(h0), eps0, amp_a, [(1, 1)])
        out = [_compare(f"H^-1[1,1] {tag}", e11, hinv[0, 0], tol),
               _compare(f"series H^-1[1,1] {tag}", hinv[0, 0], ser.values[(1, 1)], tol)]
        unit = max(2.0 / kappa, 1.0 / hop_j)
        out += _vector_checks("H^-1", tag, [(n + 1, j) for j in i], xpart, hinv[n, :n],
                              amp_a * (2 * n - 1 - i), unit * 2.0 * eps_ratio, tol)
        out += _vector_checks("H^-1", tag, [(n + 1, n + j) for j in i], ppart, hinv[n, n:],
                              amp_a * (i - 1), unit, tol)
        return out

    return _guarded(expect, tol, run)


def tuned_checks(amp_values: Iterable[float] = (1.0, 2.0, 3.0),
                 tol: float = DEFAULT_TOL) -> list[ValidationCheck]:
    """Tuned loss with balanced gain reproduces the noiseless figures."""
    out = []
    tpl = scenarios.loss_template("tuned")
    for a in amp_values:
        p = scenarios.params(a)
        tag = f"tuned balanced A={a:g}"
        ideal = math.log10(oracle.ideal_snr_normalized(3, scenarios.KAPPA, a))

        def run(p=p, a=a, tag=tag, ideal=ideal):
            z = tpl.materialize(a)
            im = information_matrices(p, z, z)
            rep = snr_per_photon_linear(p, z, z)
            return [_compare(f"noise {tag}", 0.5, noise_power_linear(p, im, z, z), tol),
                    _compare(f"log10_norm {tag}", ideal,
                             rep.log10_snr_per_photon_normalized, tol)]

        out += _guarded([(f"noise {tag}", 0.5), (f"log10_norm {tag}", ideal)], tol, run)
    return out


def timedomain_checks(tol: float = 1e-8) -> list[ValidationCheck]:
    """Mean-ODE steady state against the linear solve."""
    p = SensorParams.from_hopping(3, REFERENCE_J, 0.5, REFERENCE_KAPPA)
    out = []

    def mean_run():
        q_lin = steady_state_mean(p)
        q_ode = steady_mean_ode(assemble_generator(p), tol=1e-12)
        scale = float(np.max(np.abs(q_lin)))
        return [_compare(f"mean q[{k + 1}] ode vs solve", q_lin[k], q_ode[k], tol, scale)
                for k in range(q_lin.size)]

    out += _guarded([(f"mean q[{k + 1}] ode vs solve", math.nan) for k in range(2 * p.n_sites)],
                    tol, mean_run)

    return out


def run_validation(tol: float = DEFAULT_TOL) -> list[ValidationCheck]:
    """Full closed-form versus numeric matrix over the reference chains."""
    out = []
    for n, a in REFERENCE_CHAINS:
        out += chain_checks(n, a, tol=tol)
        for r in REFERENCE_EPS_RATIOS:
            out += beyond_linear_checks(n, a, r, tol=tol)
    out += tuned_checks(tol=tol)
    out += timedomain_checks()
    return out


#: Monte Carlo reference: three-site chain with ``kappa = J = 20`` and ``A = 0.5``.
MC_KAPPA = 20.0
MC_J = 20.0
MC_AMP = 0.5
MC_DT_FACTOR = 0.1


def monte_carlo_reference(kind: str = "Z1") -> tuple[SensorParams, np.ndarray | None,
                                                      np.ndarray | None]:
    """Model used by the Monte Carlo oracle: ``"ideal"``, ``"tuned"`` (balanced) or ``"Z1"``."""
    p = SensorParams.from_hopping(3, MC_J, MC_AMP, MC_KAPPA)
    if kind == "ideal":
        return p, None, None
    if kind == "tuned":
        z = scenarios.loss_template("tuned").materialize(MC_AMP)
        return p, z, z
    if kind == "Z1":
        return p, scenarios.loss_template("Z1").materialize(MC_AMP), None
    raise ValueError(f"unknown Monte Carlo reference {kind!r}")


def reference_dt(p: SensorParams, Z=None, Y=None, drift_offset=None) -> float:
    """``0.1 / ||M||_inf`` of the full generator."""
    M = assemble_generator(p, Z, Y, 0.0, drift_offset).matrix
    return MC_DT_FACTOR / float(np.linalg.norm(M, np.inf))


def monte_carlo_check(p: SensorParams, Z=None, Y=None, ens: TrajectoryEnsemble | None = None,
                      *, drift_offset=None, check_dt: bool = False, threads: int = 1,
                      z_max: float = 3.0) -> dict:
    """Monte Carlo noise power against the analytic linear-response value.

    Returns a dict with ``estimate``, ``std_error``, ``analytic``, ``z_score``
    and ``passed`` (``|z| <= z_max``).
    """
    if ens is None:
        ens = TrajectoryEnsemble(seed=0, n_traj=10_000, dt=reference_dt(p, Z, Y, drift_offset))
    im = information_matrices(p, Z, Y, drift_offset=drift_offset)
    analytic = noise_power_linear(p, im, Z, Y)
    res: MonteCarloResult = monte_carlo_noise_power(p, Z, Y, ens, drift_offset=drift_offset,
                                                    check_dt=check_dt, threads=threads)
    z = (res.estimate - analytic) / res.std_error
    return {"estimate": res.estimate, "std_error": res.std_error, "analytic": analytic,
            "z_score": z, "passed": bool(abs(z) <= z_max), "n_traj": res.n_traj,
            "dt": res.dt, "tau_window": res.tau_window, "seed": ens.seed,
            "refined_estimate": res.refined_estimate}


def format_table(checks: list[ValidationCheck]) -> str:
    """Plain-text pass/fail table."""
    w = max([len("element")] + [len(c.name) for c in checks])
    lines = [f"{'element':<{w}}  {'closed_form':>24}  {'numeric':>24}  {'rel_err':>10}  result"]
    for c in checks:
        res = "PASS" if c.passed else "FAIL"
        lines.append(f"{c.name:<{w}}  {c.closed_form:>24.17g}  {c.numeric:>24.17g}  "
                     f"{c.rel_err:>10.3g}  {res}")
        if c.error:
            lines.append(f"    error: {c.error}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} passed, tolerance {checks[0].tol:g}"
                 if checks else "no checks")
    return "\n".join(lines)
