import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nhsense.errors import ParameterError
from nhsense.model import SensorParams
from nhsense.oracle import reciprocal_chain
from nhsense.stability import (ROUTH_MAX_DEGREE, analyze_stability, case_bound,
                               char_poly_coeffs, coupling_offset, gamma_stability_scan,
                               necessary_bound_case1, necessary_bound_case2, routh_table,
                               spectral_abscissa, spectral_stability,
                               tridiagonal_char_poly_dn)


def test_spectral_abscissa_diagonal():
    assert spectral_abscissa(np.diag([-3.0, -1.0, -2.0])) == pytest.approx(-1.0)


def test_marginal_matrix_is_not_stable():
    rep = spectral_stability(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert not rep.stable
    assert rep.tol == pytest.approx(1e-9)


def test_spectral_rejects_bad_input():
    with pytest.raises(ParameterError):
        spectral_abscissa(np.ones((2, 3)))
    with pytest.raises(ParameterError):
        spectral_abscissa(np.array([[np.nan]]))


@settings(max_examples=50)
@given(arrays(np.float64, st.tuples(st.integers(1, 7)).map(lambda t: (t[0], t[0])),
              elements=st.floats(-3, 3)))
def test_faddeev_leverrier_matches_numpy(M):
    c = char_poly_coeffs(M)
    np.testing.assert_allclose(c, np.poly(M), rtol=1e-8, atol=1e-8 * max(1, np.abs(c).max()))


@pytest.mark.parametrize("roots,verdict", [
    ([-1, -2, -3], "stable"),
    ([-1, 2], "unstable"),
    ([-0.5, -1.0, 3.0, -4.0], "unstable"),
])
def test_routh_verdicts(roots, verdict):
    _, v = routh_table(np.poly(roots))
    assert v == verdict


def test_routh_zero_pivot_is_degenerate():
    # s^2 + 1 has a zero in the second row
    _, v = routh_table([1.0, 0.0, 1.0])
    assert v == "degenerate"
    _, v = routh_table(np.poly([-1, 1j, -1j]).real)
    assert v == "degenerate"


def test_routh_table_shape():
    tab, _ = routh_table(np.poly([-1, -2, -3, -4]))
    assert tab.shape == (5, 3)
    np.testing.assert_allclose(tab[0], [1, 35, 24])


def test_analyze_stability_skips_routh_above_cap():
    M = -np.eye(ROUTH_MAX_DEGREE + 1)
    assert analyze_stability(M).routh_verdict is None
    assert analyze_stability(-np.eye(3)).routh_verdict == "stable"


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_tridiagonal_characteristic_polynomial(n):
    h = reciprocal_chain(max(n, 1), 1.3, 0.0) if n > 1 else np.zeros((1, 1))
    np.testing.assert_allclose(tridiagonal_char_poly_dn(n, 1.3), np.poly(h), atol=1e-9)


def test_case1_roots_solve_quadratic():
    n, j, a = 5, 2.0, 1.2
    b = necessary_bound_case1(n, j, a)
    d = math.exp(-a * (n - 2)) - math.exp(a * (n - 2))
    for g in (b.gamma1, b.gamma2):
        assert g * g - j * d * g - (n + 1) * j * j / 2 == pytest.approx(0.0, abs=1e-9 * j * j)
    assert b.gamma1 < 0 < b.gamma2
    # the exact admissible edge sits just inside the asymptotic bound
    assert b.gamma2 < b.bound
    assert b.gamma2 == pytest.approx(b.bound, rel=1e-2)


def test_case1_small_root_accurate_at_large_amplification():
    b = necessary_bound_case1(7, 1.0, 8.0)
    assert b.gamma2 == pytest.approx(b.bound, rel=1e-12)


def test_case2_constraints():
    b = necessary_bound_case2(5, 10.0, 1.0)
    assert b.bound == pytest.approx(10.0 * math.exp(-4.0))
    assert b.lower == -b.bound
    assert b.upper == pytest.approx(5.0 / (math.exp(-4.0) + math.exp(4.0)))


def test_coupling_offset_positions():
    off = coupling_offset(5, 1, 0.3)
    assert off[0, 3] == off[3, 0] == 0.3 and np.count_nonzero(off) == 2
    off = coupling_offset(5, 2, 0.3)
    assert off[0, 4] == off[4, 0] == 0.3
    with pytest.raises(ParameterError):
        coupling_offset(5, 3, 0.1)


def test_gamma_scan_zero_gamma_is_stable_and_threads_do_not_matter():
    p = SensorParams.from_hopping(5, 1.0, 1.0, 10.0)
    g = np.linspace(-0.5, 0.5, 21)
    serial = gamma_stability_scan(p, 2, g)
    threaded = gamma_stability_scan(p, 2, g, threads=4)
    assert serial == threaded
    assert serial[10].stable
    assert [s.gamma for s in serial] == list(g)


def test_case2_one_sided_constraints_are_necessary():
    p = SensorParams.from_hopping(5, 1.0, 1.0, 10.0)
    b = necessary_bound_case2(5, 10.0, 1.0)
    pts = gamma_stability_scan(p, 2, [1.01 * b.upper, 1.01 * b.lower])
    assert not any(s.stable for s in pts)


def test_case_bound_dispatch():
    p = SensorParams.from_hopping(5, 1.0, 1.0, 10.0)
    assert case_bound(p, 2) == pytest.approx(10.0 * math.exp(-4.0))
    assert case_bound(p, 1) == pytest.approx(3.0 * math.exp(-3.0))
