import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhsense import scenarios
from nhsense.conditions import c3_c4_basis
from nhsense.errors import ConditioningError, ParameterError, UnstableDynamicsError, ZeroPhotonError
from nhsense.model import SensorParams, assemble_generator, build_h_p, build_h_x
from nhsense.oracle import ideal_snr_normalized
from nhsense.response import (generator_inverse, information_matrices, n_tot_linear,
                              noise_power_beyond, noise_power_linear, signal_power_beyond,
                              signal_power_linear, snr_beyond, snr_per_photon_linear,
                              steady_state_mean)
from nhsense.stability import coupling_offset

KAPPA = 10.0


def ideal(n=3, a=1.0, j=1.0, **kw):
    return SensorParams.from_hopping(n, j, a, KAPPA, **kw)


@pytest.mark.parametrize("n,a", [(3, 1.0), (5, 2.0), (7, 1.5)])
def test_ideal_information_matrix_elements(n, a):
    im = information_matrices(ideal(n, a))
    assert im.q_p[0, 0] == pytest.approx(-2 / KAPPA, rel=1e-12)
    assert im.q_x[n - 1, 0] == pytest.approx(-(2 / KAPPA) * math.exp(a * (n - 1)), rel=1e-12)
    assert im.residual < 1e-12


def test_balanced_gain_gives_noiseless_inverse():
    p = ideal(5, 1.0)
    z = np.random.default_rng(3).standard_normal((5, 2))
    np.testing.assert_allclose(information_matrices(p, z, z).q_x, information_matrices(p).q_x,
                               rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(n=st.sampled_from([3, 5, 7]), a=st.floats(0, 3), j=st.floats(0.2, 5))
def test_balanced_frame_matches_dense_inverse(n, a, j):
    p = SensorParams.from_hopping(n, j, a, KAPPA)
    im = information_matrices(p)
    np.testing.assert_allclose(im.q_x, np.linalg.inv(build_h_x(p)), rtol=1e-9,
                               atol=1e-12 * np.abs(im.q_x).max())


def test_signal_power_example():
    p = ideal(3, 1.0)
    s = signal_power_linear(p, information_matrices(p), 1e-3)
    assert s == pytest.approx(2e-6 * 100 * 0.2 ** 4 * math.exp(8), rel=1e-12)
    assert signal_power_linear(p, information_matrices(p), 0.0) == 0.0


def test_noise_power_ideal_is_vacuum():
    p = ideal(5, 2.0)
    assert noise_power_linear(p, information_matrices(p)) == pytest.approx(0.5, abs=1e-12)


def test_noise_power_z1_matches_dense_formula():
    a = 1.0
    p = scenarios.params(a)
    z = scenarios.loss_template("Z1").materialize(a)
    qp = np.linalg.inv(build_h_p(p) - z @ z.T)
    expect = 0.5 * (1 + KAPPA * qp[0, 0]) ** 2 + KAPPA * qp[0] @ z @ z.T @ qp[0]
    got = noise_power_linear(p, information_matrices(p, z), z)
    assert got == pytest.approx(expect, rel=1e-9)
    # losses that violate the span condition move the noise off vacuum;
    # for this template the vacuum term drops more than the bath term adds
    assert got < 0.5 and abs(got - 0.5) > 1e-7


@pytest.mark.parametrize("a", [0.0, 0.5, 1.0])
def test_n_tot_ideal(a):
    p = ideal(3, a, beta=2.0)
    got = n_tot_linear(p, information_matrices(p))
    assert got == pytest.approx(KAPPA * 4 * (4 / KAPPA ** 2) * (1 + math.exp(4 * a)), rel=1e-12)


def test_n_tot_zero_drive():
    p = ideal(3, 1.0, beta=0.0)
    assert n_tot_linear(p, information_matrices(p)) == 0.0


@pytest.mark.parametrize("n,a", [(3, 0.0), (3, 2.0), (5, 1.0), (7, 4.5)])
def test_snr_per_photon_ideal_closed_form(n, a):
    rep = snr_per_photon_linear(ideal(n, a))
    assert rep.log10_snr_per_photon_normalized == pytest.approx(
        math.log10(ideal_snr_normalized(n, KAPPA, a)), rel=1e-10)
    assert rep.regime == "linear" and rep.stable
    assert rep.snr == pytest.approx(rep.signal / rep.noise)
    assert rep.snr_per_photon == pytest.approx(rep.snr / rep.n_tot)


def test_snr_per_photon_refuses_zero_drive():
    with pytest.raises(ZeroPhotonError):
        snr_per_photon_linear(ideal(beta=0.0))


def test_unstable_configuration_raises():
    p = ideal(5, 1.0)
    off = coupling_offset(5, 2, 1.0)
    with pytest.raises(UnstableDynamicsError) as err:
        snr_per_photon_linear(p, drift_offset=off)
    assert err.value.abscissa > 0


def test_conditioning_cap():
    with pytest.raises(ConditioningError):
        information_matrices(ideal(7, 6.0))


def test_z1_below_ideal_at_large_amplification():
    a = 4.0
    p = scenarios.params(a)
    z = scenarios.loss_template("Z1").materialize(a)
    assert (snr_per_photon_linear(p, z).snr_per_photon
            < 1e-3 * snr_per_photon_linear(p).snr_per_photon)


def test_steady_state_mean_structure():
    p = ideal(5, 1.0, beta=1.3)
    q = steady_state_mean(p)
    np.testing.assert_array_equal(q[5:], 0.0)
    im = information_matrices(p)
    assert q[0] == pytest.approx(math.sqrt(2 * KAPPA) * 1.3 * im.q_x[0, 0], rel=1e-12)
    q2 = steady_state_mean(ideal(5, 1.0, beta=2.6))
    np.testing.assert_allclose(q2, 2 * q, rtol=1e-12)


def test_steady_state_mean_solves_generator():
    p = ideal(3, 0.7)
    z = np.array([[0.2], [0.1], [0.3]])
    g = assemble_generator(p, z, None, 0.05)
    q = steady_state_mean(p, z, None, 0.05)
    np.testing.assert_allclose(g.matrix @ q, g.drive, atol=1e-10)


def test_generator_inverse_matches_dense():
    p = ideal(5, 1.2)
    gi = generator_inverse(p, eps=0.3)
    np.testing.assert_allclose(gi.inverse, np.linalg.inv(assemble_generator(p, eps=0.3).matrix),
                               rtol=1e-8, atol=1e-12 * np.abs(gi.inverse).max())
    assert gi.log_abs(5, 0) == pytest.approx(math.log(abs(gi.inverse[5, 0])), rel=1e-12)


def test_signal_beyond_tends_to_linear():
    p = ideal(3, 0.5)
    im = information_matrices(p)
    dev = []
    for e in (1e-2, 5e-3, 2.5e-3):
        dev.append(abs(signal_power_beyond(p, eps0=e) / signal_power_linear(p, im, e) - 1))
    assert dev[2] < dev[1] < dev[0]
    assert dev[0] / dev[1] == pytest.approx(4.0, rel=0.05)


def test_noise_beyond_at_zero_is_linear():
    p = ideal(3, 0.5)
    z = np.array([[0.3], [0.0], [0.1]])
    assert noise_power_beyond(p, z, None, 0.0) == pytest.approx(
        noise_power_linear(p, information_matrices(p, z), z), rel=1e-12)
    assert noise_power_beyond(p, eps0=0.0) == pytest.approx(0.5, abs=1e-12)


def test_noise_beyond_restored_under_c2_c3_c4():
    p = ideal(5, 0.6)
    z = c3_c4_basis(build_h_x(p), build_h_p(p)) @ np.array([[1.0], [0.5]])
    for e in (0.01, 0.1, 1.0):
        assert noise_power_beyond(p, z, z, e) == pytest.approx(noise_power_beyond(p, eps0=e),
                                                               rel=1e-9)


def test_noise_beyond_excess_when_c3_fails():
    p = ideal(3, 0.5)
    z = build_h_p(p)[:, [2]] / np.linalg.norm(build_h_p(p)[:, 2])
    assert noise_power_beyond(p, z, z, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert noise_power_beyond(p, z, z, 0.5) > noise_power_beyond(p, eps0=0.5) + 1e-6


def test_snr_beyond_report():
    p = ideal(3, 0.5)
    rep = snr_beyond(p, eps0=0.01)
    assert rep.regime == "beyond_linear"
    assert rep.snr_per_photon == pytest.approx(rep.signal / (rep.noise * rep.n_tot))
    with pytest.raises(ParameterError):
        snr_beyond(p, eps0=0.0)
    with pytest.raises(ZeroPhotonError):
        snr_beyond(ideal(beta=0.0), eps0=0.01)
