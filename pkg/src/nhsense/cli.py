"""Command-line front end.

Subcommands: ``report``, ``sweep``, ``stability``, ``tune`` and ``validate``.
Exit codes: 0 success, 1 usage or configuration error, 2 unstable
configuration, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import DEFAULT_TOL as CONDITION_TOL
from .conditions import check_conditions, repair_to_c1, synthesize_balanced_gain
from .config import SensorConfig, config_as_dict, load_config, shipped_config_dir
from .errors import ConfigError, ConvergenceError, NHSenseError, UnstableDynamicsError
from .model import assemble_generator, build_h_p, build_h_x
from .response import snr_beyond, snr_per_photon_linear
from .stability import analyze_stability, case_bound, gamma_stability_scan
from .timedomain import TrajectoryEnsemble
from .validation import (DEFAULT_TOL as VALIDATION_TOL, format_table, monte_carlo_check,
                         monte_carlo_reference, reference_dt, run_validation)

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_VALIDATION = 0, 1, 2, 3

SWEEP_COLUMNS = ("sweep_var", "value", "signal", "noise", "n_tot", "snr_per_photon",
                 "log10_norm", "stable")
STABILITY_COLUMNS = ("gamma", "abscissa_x", "abscissa_p", "stable", "bound_case", "bound_value")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    """17 significant digits in scientific notation; empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def resolve_config_path(name: str) -> Path:
    """A file path, or the stem of a shipped reference configuration."""
    p = Path(name)
    if p.exists():
        return p
    shipped = shipped_config_dir() / (name if name.endswith(".toml") else f"{name}.toml")
    if shipped.exists():
        return shipped
    return p


def _load(args) -> SensorConfig:
    if not args.config:
        raise UsageError(f"'{args.command}' needs --config PATH")
    return load_config(resolve_config_path(args.config))


def _model(cfg: SensorConfig):
    return cfg.params(), cfg.loss_matrix(), cfg.gain_matrix(), cfg.drift_offset()


def evaluate_point(cfg: SensorConfig) -> dict:
    """Sensing figures for one configuration; unstable points carry no numbers.

    ``eps0 != 0`` selects the beyond-linear report, otherwise linear response
    at ``eps``.
    """
    try:
        p, z, y, off = _model(cfg)
        if cfg.eps0 != 0:
            rep = snr_beyond(p, z, y, cfg.eps0, drift_offset=off)
        else:
            rep = snr_per_photon_linear(p, z, y, cfg.eps, drift_offset=off)
    except UnstableDynamicsError as exc:
        return {"stable": False, "error": str(exc)}
    except NHSenseError as exc:
        return {"stable": None, "error": f"{type(exc).__name__}: {exc}"}
    return {"stable": True, "error": None, "signal": rep.signal, "noise": rep.noise,
            "n_tot": rep.n_tot, "snr_per_photon": rep.snr_per_photon,
            "log10_norm": rep.log10_snr_per_photon_normalized, "report": rep}


def _header(kind: str, cfg_name: str, extra: list[str]) -> list[str]:
    return [f"# nhsense {__version__} {kind}", f"# config: {Path(cfg_name).name}"] + \
        [f"# {e}" for e in extra]


def cmd_report(args) -> int:
    cfg = _load(args)
    p, z, y, off = _model(cfg)
    tol = args.tol if args.tol is not None else CONDITION_TOL
    hx, hp = build_h_x(p), build_h_p(p)
    gen0 = assemble_generator(p, z, y, 0.0, off)
    eps = cfg.eps0 if cfg.eps0 != 0 else cfg.eps
    gen = assemble_generator(p, z, y, eps, off)
    stab = {"x": analyze_stability(gen0.mx_block), "p": analyze_stability(gen0.mp_block),
            "full": analyze_stability(gen.matrix)}
    stable = all(s.stable for s in stab.values())
    cond = check_conditions(hx, hp, z, y, tol)
    out = {"input": config_as_dict(cfg), "stable": stable,
           "stability": {k: v.to_dict() for k, v in stab.items()},
           "conditions": cond.to_dict(), "sensing": None, "error": None}
    code = EXIT_OK
    if stable:
        pt = evaluate_point(cfg)
        if pt["stable"]:
            out["sensing"] = pt["report"].to_dict()
        else:
            out["error"] = pt["error"]
            if pt["stable"] is False:
                out["stable"] = False
                code = EXIT_UNSTABLE
            else:
                code = EXIT_USAGE
    else:
        code = EXIT_UNSTABLE
    _emit(_dump_json(out), args.out)
    return code


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] table", key="sweep")
    var, grid = cfg.sweep.variable, cfg.sweep.grid

    def one(v):
        try:
            c = cfg.with_value(var, float(v))
            c.params()
        except NHSenseError as exc:
            return {"stable": None, "error": f"{type(exc).__name__}: {exc}"}
        return evaluate_point(c)

    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as ex:
            rows = list(ex.map(one, grid))
    else:
        rows = [one(v) for v in grid]
    extra = [f"sweep_var={var} points={len(grid)}",
             "regime=" + ("beyond_linear" if (cfg.eps0 != 0 or var == "eps0") else "linear")]
    extra += [f"error at {var}={fmt(v)}: {r['error']}" for v, r in zip(grid, rows)
              if r["stable"] is None]
    lines = _header("sweep", args.config, extra)
    lines.append(",".join(SWEEP_COLUMNS))
    for v, r in zip(grid, rows):
        ok = r["stable"] is True
        cells = [var, fmt(v)] + [fmt(r[k]) if ok else "" for k in
                                 ("signal", "noise", "n_tot", "snr_per_photon", "log10_norm")]
        cells.append({True: "true", False: "false", None: ""}[r["stable"]])
        lines.append(",".join(cells))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = _load(args)
    p = cfg.params()
    case = args.case if args.case is not None else cfg.coupling_case
    bound = case_bound(p, case)
    gmax = args.gamma_max if args.gamma_max is not None else 10.0 * bound
    gmin = args.gamma_min if args.gamma_min is not None else -gmax
    if args.n_gamma < 1:
        raise UsageError("--n-gamma must be >= 1")
    gammas = np.linspace(gmin, gmax, args.n_gamma)
    pts = gamma_stability_scan(p, case, gammas, args.tol, args.threads)
    lines = _header("stability", args.config, [f"case={case} bound={fmt(bound)}"])
    lines.append(",".join(STABILITY_COLUMNS))
    for s in pts:
        lines.append(",".join([fmt(s.gamma), fmt(s.abscissa_x), fmt(s.abscissa_p),
                               "true" if s.stable else "false", str(case), fmt(bound)]))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _nice(c: float) -> float:
    """Snap to a short rational when that is exact to 1e-10 relative."""
    f = Fraction(c).limit_denominator(10_000)
    return float(f) if abs(float(f) - c) <= 1e-10 * abs(c) else float(c)


def template_form(repair, amp_a: float, exp_hint: np.ndarray, max_mult: int,
                  rel: float = 1e-8):
    """Express ``repair(A)`` entrywise as ``c e^{m A}`` with constant ``c`` and integer ``m``.

    ``repair`` maps ``A`` to a numeric matrix. Candidate exponents are tried
    (the hint first) and accepted when ``c`` agrees at three values of ``A``.
    Returns template rows or ``None`` when some entry has no such form.
    """
    amps = (amp_a, amp_a + 0.37, amp_a + 0.81)
    mats = [repair(a) for a in amps]
    scale = max(float(np.max(np.abs(m))) for m in mats) or 1.0
    rows = []
    for i in range(mats[0].shape[0]):
        row = []
        for j in range(mats[0].shape[1]):
            vals = [m[i, j] for m in mats]
            if all(abs(v) <= 1e-12 * scale for v in vals):
                row.append([0.0, 0])
                continue
            cands = [int(exp_hint[i, j])] + [k for k in range(-max_mult, max_mult + 1)
                                              if k != exp_hint[i, j]]
            for m in cands:
                cs = [v * math.exp(-m * a) for v, a in zip(vals, amps)]
                if max(abs(c - cs[0]) for c in cs) <= rel * abs(cs[0]):
                    row.append([_nice(cs[0]), m])
                    break
            else:
                return None
        rows.append(row)
    return rows


def cmd_tune(args) -> int:
    cfg = _load(args)
    if cfg.loss is None:
        raise ConfigError("tune needs a [loss] template", key="loss")
    tol = args.tol if args.tol is not None else CONDITION_TOL
    p, z, y, _ = _model(cfg)
    hx, hp = build_h_x(p), build_h_p(p)
    before = check_conditions(hx, hp, z, y, tol)
    z_new = repair_to_c1(z, hp)
    y_new = synthesize_balanced_gain(z_new) if args.balance else y
    after = check_conditions(hx, hp, z_new, y_new, tol)

    def repair_at(a):
        c = cfg.with_value("amp_a", a)
        return repair_to_c1(c.loss_matrix(), build_h_p(c.params()))

    rows = template_form(repair_at, cfg.amp_a, cfg.loss.exp_mult, cfg.n_sites)
    loss = ({"form": "template", "scale": 1.0, "rows": rows} if rows is not None
            else {"form": "numeric", "amp_a": cfg.amp_a, "matrix": z_new})
    out = {"amp_a": cfg.amp_a, "before": before.to_dict(), "after": after.to_dict(),
           "change_norm": float(np.linalg.norm(z_new - z)), "loss": loss,
           "gain": ({"balanced": True} if args.balance else None)}
    _emit(_dump_json(out), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.monte_carlo:
        if args.config:
            cfg = _load(args)
            p, z, y, off = _model(cfg)
            mc = cfg.monte_carlo
        else:
            (p, z, y), off, mc = monte_carlo_reference("Z1"), None, None
        seed = args.seed if args.seed is not None else (mc.seed if mc else 0)
        n_traj = args.n_traj or (mc.n_traj if mc else 10_000)
        dt = args.dt or (mc.dt if mc else None) or reference_dt(p, z, y, off)
        tau = args.tau_window or (mc.tau_window if mc else None)
        t_end = mc.t_end if mc else None
        ens = TrajectoryEnsemble(seed=seed, n_traj=n_traj, dt=dt, tau_window=tau, t_end=t_end)
        try:
            res = monte_carlo_check(p, z, y, ens, drift_offset=off, check_dt=args.check_dt,
                                    threads=args.threads)
        except ConvergenceError as exc:
            print(f"nhsense: validation failed: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        _emit(_dump_json(res), args.out)
        return EXIT_OK if res["passed"] else EXIT_VALIDATION
    tol = args.tol if args.tol is not None else VALIDATION_TOL
    checks = run_validation(tol)
    _emit(format_table(checks) + "\n", args.out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), metavar="PATH",
                        help="TOML config file or the name of a shipped config")
    parser.add_argument("--out", default=d(None), metavar="PATH",
                        help="write the result here instead of stdout")
    parser.add_argument("--tol", type=float, default=d(None), metavar="X",
                        help="condition, stability or validation tolerance")
    parser.add_argument("--threads", type=int, default=d(1), metavar="K",
                        help="worker threads (results do not depend on K)")
    parser.add_argument("--seed", type=int, default=d(None), metavar="S",
                        help="Monte Carlo master seed")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nhsense", description="Nonreciprocal chain sensor toolkit.")
    ap.add_argument("--version", action="version", version=f"nhsense {__version__}")
    _common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    sp = sub.add_parser("report", help="JSON sensing, stability and condition report")
    _common(sp, True)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("sweep", help="CSV over the [sweep] grid of the config")
    _common(sp, True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("stability", help="CSV scan over a residual long-range coupling")
    _common(sp, True)
    sp.add_argument("--case", type=int, choices=(1, 2), default=None,
                    help="1: sites 1 and N-1, 2: sites 1 and N (default from config)")
    sp.add_argument("--gamma-min", type=float, default=None)
    sp.add_argument("--gamma-max", type=float, default=None,
                    help="default 10 times the necessary bound")
    sp.add_argument("--n-gamma", type=int, default=101)
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("tune", help="project the loss template onto the tunable subspace")
    _common(sp, True)
    sp.add_argument("--balance", action="store_true", help="also emit balanced gain Y = Z'")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("validate", help="closed-form versus numeric checks")
    _common(sp, True)
    sp.add_argument("--monte-carlo", action="store_true",
                    help="run the Monte Carlo noise-power check instead")
    sp.add_argument("--n-traj", type=int, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--tau-window", type=float, default=None)
    sp.add_argument("--check-dt", action="store_true",
                    help="also step at dt/2 and fail if the estimate moves by > 1 std error")
    sp.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # --help, --version and usage errors
        return int(exc.code or 0)
    if args.command is None:
        ap.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"nhsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnstableDynamicsError as exc:
        print(f"nhsense: unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except NHSenseError as exc:
        print(f"nhsense: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
