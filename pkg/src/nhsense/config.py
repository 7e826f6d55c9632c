"""TOML configuration files for the command-line front end.

A configuration describes one sensor: the chain parameters, loss and gain
templates, the perturbation, an optional residual long-range coupling, an
optional sweep and Monte Carlo settings. See the README for the schema.
Every schema error names the offending key and, when it can be located, the
line it appears on.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from .errors import ConfigError, ParameterError
from .model import CouplingTemplate, SensorParams
from .stability import coupling_offset

SWEEP_VARIABLES = ("amp_a", "alpha_scale", "n_sites", "eps0", "gamma")

_SCHEMA = {
    "sensor": {"n_sites", "kappa", "beta", "tau", "hop_w", "drive_delta", "hop_j", "amp_a"},
    "loss": {"scale", "rows"},
    "gain": {"scale", "rows", "balanced"},
    "perturbation": {"eps", "eps0"},
    "coupling": {"case", "gamma"},
    "sweep": {"variable", "start", "stop", "step", "num", "values"},
    "monte_carlo": {"n_traj", "dt", "tau_window", "t_end", "seed"},
    "meta": {"name", "description"},
}

_KEY_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_-]*)\s*=")
_TABLE_RE = re.compile(r"^\s*\[\s*([A-Za-z_][A-Za-z0-9_.-]*)\s*\]")


def _line_index(text: str) -> dict[str, int]:
    """Map dotted keys and table names to 1-based line numbers."""
    out: dict[str, int] = {}
    table = ""
    for i, line in enumerate(text.splitlines(), start=1):
        m = _TABLE_RE.match(line)
        if m:
            table = m.group(1)
            out.setdefault(table, i)
            continue
        m = _KEY_RE.match(line)
        if m:
            key = f"{table}.{m.group(1)}" if table else m.group(1)
            out.setdefault(key, i)
    return out


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """Grid over one configuration variable; grid order is output order."""

    variable: str
    grid: np.ndarray


@dataclass(frozen=True)
class MonteCarloConfig:
    n_traj: int = 10_000
    dt: float | None = None
    tau_window: float | None = None
    t_end: float | None = None
    seed: int = 0


@dataclass(frozen=True, eq=False)
class SensorConfig:
    """Parsed configuration.

    ``amp_mode`` records which quantity stays fixed when ``A`` changes:
    ``"w"`` keeps ``w`` (``Delta = w tanh A``), ``"j"`` keeps ``J``.
    Templates are stored unscaled; ``loss_scale`` and ``gain_scale`` multiply
    them on materialization.
    """

    n_sites: int
    kappa: float
    beta: float
    tau: float
    amp_mode: str
    fixed_rate: float
    amp_a: float
    loss: CouplingTemplate | None = None
    loss_scale: float = 1.0
    gain: CouplingTemplate | None = None
    gain_scale: float = 1.0
    gain_balanced: bool = False
    eps: float = 1e-3
    eps0: float = 0.0
    coupling_case: int = 2
    gamma: float = 0.0
    sweep: SweepSpec | None = None
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    raw: dict = field(default_factory=dict)

    def params(self) -> SensorParams:
        if self.amp_mode == "j":
            return SensorParams.from_hopping(self.n_sites, self.fixed_rate, self.amp_a,
                                             self.kappa, self.beta, self.tau)
        w = self.fixed_rate
        return SensorParams(self.n_sites, w, w * math.tanh(self.amp_a), self.kappa,
                            self.beta, self.tau)

    def loss_matrix(self) -> np.ndarray | None:
        if self.loss is None:
            return None
        return self.loss_scale * self.loss.materialize(self.amp_a)

    def loss_template(self) -> CouplingTemplate | None:
        """Loss template with its scale folded in."""
        return None if self.loss is None else self.loss.scaled(self.loss_scale)

    def gain_matrix(self) -> np.ndarray | None:
        if self.gain_balanced:
            return self.loss_matrix()
        if self.gain is None:
            return None
        return self.gain_scale * self.gain.materialize(self.amp_a)

    def drift_offset(self) -> np.ndarray | None:
        if self.gamma == 0:
            return None
        return coupling_offset(self.n_sites, self.coupling_case, self.gamma)

    def with_value(self, variable: str, value: float) -> "SensorConfig":
        """Copy with one sweep variable replaced.

        ``alpha_scale`` rescales the loss template (and balanced gain with it).
        """
        if variable == "amp_a":
            return replace(self, amp_a=float(value))
        if variable == "n_sites":
            n = int(round(value))
            if n != value:
                raise ParameterError(f"n_sites must be an integer, got {value}")
            return replace(self, n_sites=n)
        if variable == "eps0":
            return replace(self, eps0=float(value))
        if variable == "gamma":
            return replace(self, gamma=float(value))
        if variable == "alpha_scale":
            if self.loss is None:
                raise ParameterError("alpha_scale needs a [loss] template")
            return replace(self, loss_scale=float(value))
        raise ParameterError(f"unknown sweep variable {variable!r}")


class _Reader:
    def __init__(self, data: dict, lines: dict[str, int]):
        self.data = data
        self.lines = lines

    def err(self, msg: str, key: str) -> ConfigError:
        line = self.lines.get(key)
        if line is None and "." in key:
            line = self.lines.get(key.rsplit(".", 1)[0])
        return ConfigError(msg, key=key, line=line)

    def table(self, name: str) -> dict:
        t = self.data.get(name, {})
        if not isinstance(t, dict):
            raise self.err(f"'{name}' must be a table", name)
        unknown = sorted(set(t) - _SCHEMA[name])
        if unknown:
            raise self.err(f"unknown key '{unknown[0]}' in [{name}]; allowed: "
                           f"{', '.join(sorted(_SCHEMA[name]))}", f"{name}.{unknown[0]}")
        return t

    def number(self, t: dict, table: str, key: str, default=None, *, positive=False,
               nonneg=False, integer=False):
        path = f"{table}.{key}"
        if key not in t:
            if default is None:
                raise self.err(f"missing required key '{key}' in [{table}]", path)
            return default
        v = t[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.err(f"expected a number, got {v!r}", path)
        if integer and not isinstance(v, int):
            raise self.err(f"expected an integer, got {v!r}", path)
        if not math.isfinite(v):
            raise self.err(f"expected a finite number, got {v!r}", path)
        if positive and not v > 0:
            raise self.err(f"must be positive, got {v!r}", path)
        if nonneg and v < 0:
            raise self.err(f"must be >= 0, got {v!r}", path)
        return v


def _template(r: _Reader, t: dict, name: str, n_sites: int) -> tuple[CouplingTemplate, float]:
    if "rows" not in t:
        raise r.err(f"[{name}] needs 'rows' (list of [coeff, exp_mult] pairs per site)",
                    f"{name}.rows")
    scale = r.number(t, name, "scale", 1.0)
    rows = t["rows"]
    if not isinstance(rows, list) or len(rows) != n_sites:
        raise r.err(f"'rows' must list one row per site ({n_sites})", f"{name}.rows")
    try:
        tpl = CouplingTemplate.from_pairs(rows)
    except (ParameterError, ValueError, TypeError) as exc:
        raise r.err(f"bad template: {exc}", f"{name}.rows") from exc
    if tpl.shape[0] != n_sites:
        raise r.err(f"'rows' must list one row per site ({n_sites})", f"{name}.rows")
    return tpl, float(scale)


def _grid(r: _Reader, t: dict) -> np.ndarray:
    has_range = any(k in t for k in ("start", "stop", "step", "num"))
    if "values" in t:
        if has_range:
            raise r.err("give either 'values' or start/stop with step or num", "sweep.values")
        vals = t["values"]
        if not isinstance(vals, list) or any(isinstance(v, bool) or not isinstance(v, (int, float))
                                             for v in vals):
            raise r.err("'values' must be a list of numbers", "sweep.values")
        grid = np.asarray(vals, dtype=float)
    else:
        start = r.number(t, "sweep", "start")
        stop = r.number(t, "sweep", "stop")
        if ("step" in t) == ("num" in t):
            raise r.err("give exactly one of 'step' or 'num'", "sweep")
        if "num" in t:
            num = r.number(t, "sweep", "num", integer=True, nonneg=True)
            grid = np.linspace(start, stop, num)
        else:
            step = r.number(t, "sweep", "step")
            if step == 0 or (stop - start) * step < 0:
                raise r.err("'step' must be nonzero and point from start to stop", "sweep.step")
            k = (stop - start) / step
            count = int(math.floor(k + 1e-9)) + 1
            grid = start + step * np.arange(count)
            if abs(k - round(k)) <= 1e-9 * max(1.0, abs(k)):
                grid[-1] = stop
    if grid.size == 0:
        raise r.err("sweep grid is empty", "sweep")
    if not np.all(np.isfinite(grid)):
        raise r.err("sweep grid has non-finite values", "sweep")
    d = np.diff(grid)
    if grid.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise r.err("sweep grid must be strictly monotone", "sweep")
    return grid


def parse_config(text: str, source: str = "<string>") -> SensorConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        On TOML syntax errors or schema violations.
    """
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"{source}: invalid TOML: {exc}",
                          line=int(m.group(1)) if m else None) from exc
    if not data:
        raise ConfigError(f"{source}: config is empty; expected at least a [sensor] table with "
                          "n_sites, kappa and one of (hop_w, drive_delta), (hop_w, amp_a) or "
                          "(hop_j, amp_a)", key="sensor")
    r = _Reader(data, _line_index(text))
    unknown = sorted(set(data) - set(_SCHEMA))
    if unknown:
        raise r.err(f"unknown table [{unknown[0]}]; allowed: {', '.join(sorted(_SCHEMA))}",
                    unknown[0])
    if "sensor" not in data:
        raise ConfigError("missing required table [sensor]", key="sensor")
    s = r.table("sensor")
    n = r.number(s, "sensor", "n_sites", integer=True)
    if n < 3 or n % 2 == 0:
        raise r.err(f"n_sites must be odd and >= 3, got {n}", "sensor.n_sites")
    kappa = r.number(s, "sensor", "kappa", positive=True)
    beta = r.number(s, "sensor", "beta", 1.0, nonneg=True)
    tau = r.number(s, "sensor", "tau", 1.0, positive=True)

    keys = {k for k in ("hop_w", "drive_delta", "hop_j", "amp_a") if k in s}
    if keys == {"hop_w", "drive_delta"}:
        w = r.number(s, "sensor", "hop_w", positive=True)
        d = r.number(s, "sensor", "drive_delta", nonneg=True)
        if d >= w:
            raise r.err("need drive_delta < hop_w", "sensor.drive_delta")
        mode, rate, amp = "w", w, math.atanh(d / w)
    elif keys == {"hop_w", "amp_a"}:
        mode, rate = "w", r.number(s, "sensor", "hop_w", positive=True)
        amp = r.number(s, "sensor", "amp_a", nonneg=True)
    elif keys == {"hop_j", "amp_a"}:
        mode, rate = "j", r.number(s, "sensor", "hop_j", positive=True)
        amp = r.number(s, "sensor", "amp_a", nonneg=True)
    else:
        raise r.err("give exactly one parameterization: (hop_w, drive_delta), (hop_w, amp_a) "
                    f"or (hop_j, amp_a); found {sorted(keys)}", "sensor")

    loss, loss_scale = None, 1.0
    if "loss" in data:
        loss, loss_scale = _template(r, r.table("loss"), "loss", n)
    gain, gain_scale, balanced = None, 1.0, False
    if "gain" in data:
        g = r.table("gain")
        bal = g.get("balanced", False)
        if not isinstance(bal, bool):
            raise r.err("'balanced' must be true or false", "gain.balanced")
        if bal:
            if "rows" in g or "scale" in g:
                raise r.err("balanced gain takes no 'rows' or 'scale'", "gain.balanced")
            balanced = True
        else:
            gain, gain_scale = _template(r, g, "gain", n)

    pt = r.table("perturbation")
    eps = r.number(pt, "perturbation", "eps", 1e-3)
    eps0 = r.number(pt, "perturbation", "eps0", 0.0)

    cp = r.table("coupling")
    case = r.number(cp, "coupling", "case", 2, integer=True)
    if case not in (1, 2):
        raise r.err(f"case must be 1 or 2, got {case}", "coupling.case")
    gamma = r.number(cp, "coupling", "gamma", 0.0)

    sweep = None
    if "sweep" in data:
        sw = r.table("sweep")
        var = sw.get("variable")
        if var not in SWEEP_VARIABLES:
            raise r.err(f"'variable' must be one of {', '.join(SWEEP_VARIABLES)}, got {var!r}",
                        "sweep.variable")
        grid = _grid(r, sw)
        if var == "n_sites" and (loss is not None or gain is not None):
            raise r.err("an n_sites sweep cannot use site-indexed loss or gain templates",
                        "sweep.variable")
        if var == "alpha_scale" and (loss is None or loss.shape[1] == 0):
            raise r.err("an alpha_scale sweep needs a [loss] template", "sweep.variable")
        sweep = SweepSpec(var, grid)

    mc = r.table("monte_carlo")
    mcc = MonteCarloConfig(
        n_traj=r.number(mc, "monte_carlo", "n_traj", 10_000, integer=True, positive=True),
        dt=r.number(mc, "monte_carlo", "dt", 0.0, nonneg=True) or None,
        tau_window=r.number(mc, "monte_carlo", "tau_window", 0.0, nonneg=True) or None,
        t_end=r.number(mc, "monte_carlo", "t_end", 0.0, nonneg=True) or None,
        seed=r.number(mc, "monte_carlo", "seed", 0, integer=True, nonneg=True),
    )
    r.table("meta")

    cfg = SensorConfig(n, float(kappa), float(beta), float(tau), mode, float(rate), float(amp),
                       loss, loss_scale, gain, gain_scale, balanced, float(eps), float(eps0),
                       int(case), float(gamma), sweep, mcc, data)
    try:
        cfg.params()
    except ParameterError as exc:
        raise r.err(str(exc), "sensor") from exc
    return cfg


def load_config(path: str | Path) -> SensorConfig:
    """Read and parse a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def shipped_config_dir() -> Path:
    """Directory of the reference configurations installed with the package."""
    return Path(__file__).with_name("configs")


def config_as_dict(cfg: SensorConfig) -> dict[str, Any]:
    """JSON-friendly echo of the resolved inputs."""
    p = cfg.params()
    return {
        "n_sites": cfg.n_sites, "kappa": cfg.kappa, "beta": cfg.beta, "tau": cfg.tau,
        "hop_w": p.hop_w, "drive_delta": p.drive_delta, "hop_j": p.hop_j, "amp_a": p.amp_a,
        "loss": None if cfg.loss is None else cfg.loss.to_pairs(),
        "loss_scale": cfg.loss_scale,
        "gain": "balanced" if cfg.gain_balanced else (
            None if cfg.gain is None else cfg.gain.to_pairs()),
        "gain_scale": cfg.gain_scale,
        "eps": cfg.eps, "eps0": cfg.eps0,
        "coupling_case": cfg.coupling_case, "gamma": cfg.gamma,
    }
