import math

import numpy as np
import pytest

from nhsense import scenarios
from nhsense.config import load_config, parse_config, shipped_config_dir
from nhsense.errors import ConfigError

BASE = """\
[sensor]
n_sites = 3
kappa = 10.0
hop_w = 1.0e5
amp_a = 2.0
"""


def test_all_shipped_configs_parse():
    paths = sorted(shipped_config_dir().glob("*.toml"))
    assert len(paths) >= 9
    for path in paths:
        cfg = load_config(path)
        assert cfg.sweep is not None and cfg.sweep.grid.size == 51
        assert cfg.params().n_sites == 3


def test_shipped_z1_matches_scenario_template():
    cfg = load_config(shipped_config_dir() / "Z1.toml")
    np.testing.assert_allclose(cfg.loss_matrix(), scenarios.loss_template("Z1").materialize(2.0),
                               rtol=1e-15)
    p, ref = cfg.params(), scenarios.params(2.0)
    assert p.hop_w == ref.hop_w and p.drive_delta == pytest.approx(ref.drive_delta, rel=1e-15)


def test_balanced_gain_follows_loss():
    cfg = load_config(shipped_config_dir() / "tuned-balanced.toml")
    np.testing.assert_array_equal(cfg.gain_matrix(), cfg.loss_matrix())
    half = cfg.with_value("alpha_scale", 0.25)
    np.testing.assert_array_equal(half.gain_matrix(), half.loss_matrix())


def test_parameterizations_agree():
    a = 0.7
    d = 1e5 * math.tanh(a)
    j = 1e5 / math.cosh(a)
    cfgs = [
        parse_config(BASE.replace("amp_a = 2.0", f"amp_a = {a}")),
        parse_config(BASE.replace("amp_a = 2.0", f"drive_delta = {d!r}")),
        parse_config(BASE.replace("hop_w = 1.0e5", f"hop_j = {j!r}")
                     .replace("amp_a = 2.0", f"amp_a = {a}")),
    ]
    for c in cfgs:
        p = c.params()
        assert p.amp_a == pytest.approx(a, rel=1e-12)
        assert p.hop_j == pytest.approx(j, rel=1e-12)


def test_amp_mode_semantics():
    w_mode = parse_config(BASE).with_value("amp_a", 1.0).params()
    assert w_mode.hop_w == 1e5
    j_mode = parse_config(BASE.replace("hop_w", "hop_j")).with_value("amp_a", 1.0).params()
    assert j_mode.hop_j == pytest.approx(1e5, rel=1e-12)


def test_empty_config():
    with pytest.raises(ConfigError) as err:
        parse_config("")
    assert "n_sites" in str(err.value) and err.value.key == "sensor"


def test_error_reports_key_and_line():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("kappa = 10.0", "kappa = -1.0"))
    assert err.value.key == "sensor.kappa" and err.value.line == 3


def test_unknown_key_and_table():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "kapa = 1\n")
    assert err.value.key == "sensor.kapa" and err.value.line == 6
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "[foo]\nx = 1\n")
    assert err.value.key == "foo"


def test_invalid_toml_has_line():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "n = = 2\n")
    assert err.value.line == 6


@pytest.mark.parametrize("extra", ["", "drive_delta = 1.0\n"])
def test_parameterization_must_be_unique(extra):
    text = BASE.replace("amp_a = 2.0\n", "") + extra
    if extra:
        text += "amp_a = 1.0\n"
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize("n", ["4", "1", "3.5"])
def test_bad_site_count(n):
    with pytest.raises(ConfigError):
        parse_config(BASE.replace("n_sites = 3", f"n_sites = {n}"))


def test_template_row_count_checked():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "[loss]\nrows = [[[1, 0]]]\n")
    assert err.value.key == "loss.rows"


@pytest.mark.parametrize("sweep", [
    'variable = "amp_a"\nvalues = []',
    'variable = "amp_a"\nvalues = [0.0, 1.0, 0.5]',
    'variable = "amp_a"\nvalues = [1.0, 1.0]',
    'variable = "amp_a"\nstart = 0.0\nstop = 1.0\nstep = -0.1',
    'variable = "amp_a"\nstart = 0.0\nstop = 1.0\nnum = 0',
    'variable = "amp_a"\nstart = 0.0\nstop = 1.0',
    'variable = "volume"\nvalues = [1.0]',
    'variable = "alpha_scale"\nvalues = [1.0]',
])
def test_bad_sweeps(sweep):
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "[sweep]\n" + sweep + "\n")
    assert err.value.key.startswith("sweep")


def test_n_sites_sweep_rejects_templates():
    text = BASE + "[loss]\nrows = [[[1, 0]], [[0, 0]], [[0, 0]]]\n"
    with pytest.raises(ConfigError):
        parse_config(text + '[sweep]\nvariable = "n_sites"\nvalues = [3, 5]\n')


def test_step_grid_endpoint():
    cfg = parse_config(BASE + '[sweep]\nvariable = "amp_a"\nstart = 0.0\nstop = 5.0\nstep = 0.1\n')
    g = cfg.sweep.grid
    assert g.size == 51 and g[0] == 0.0 and g[-1] == 5.0
    desc = parse_config(BASE + '[sweep]\nvariable = "eps0"\nstart = 1.0\nstop = 0.0\nnum = 5\n')
    np.testing.assert_allclose(desc.sweep.grid, [1.0, 0.75, 0.5, 0.25, 0.0])


def test_defaults():
    cfg = parse_config(BASE)
    assert cfg.eps == 1e-3 and cfg.eps0 == 0.0 and cfg.gamma == 0.0
    assert cfg.coupling_case == 2 and cfg.drift_offset() is None
    assert cfg.monte_carlo.n_traj == 10_000 and cfg.monte_carlo.seed == 0
    assert cfg.loss_matrix() is None and cfg.gain_matrix() is None
