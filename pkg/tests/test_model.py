import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relay_sg.model import (
    DegenerateProfileError,
    TapProfile,
    build_tap_profile,
    db_to_linear,
    dbm_to_watt,
    density_for_lambda_bar,
    density_for_lambda_hat,
    effective_densities,
    linear_to_db,
    lognormal_moment,
    multipath_moment,
    partial_fraction_coeffs,
    reflection_prefactor,
    table_one_params,
    watt_to_dbm,
)


def test_dbm_conversions():
    assert dbm_to_watt(0.0) == pytest.approx(1e-3, rel=1e-15)
    assert dbm_to_watt(30.0) == pytest.approx(1.0, rel=1e-15)
    assert db_to_linear(-93.0) == pytest.approx(10**-9.3, rel=1e-14)


@given(st.floats(-200, 200))
def test_db_round_trip(x):
    assert linear_to_db(db_to_linear(x)) == pytest.approx(x, abs=1e-12)
    assert watt_to_dbm(dbm_to_watt(x)) == pytest.approx(x, abs=1e-12)


def test_default_scenario():
    p = table_one_params()
    # -97.8 dBm of noise in 10 MHz, 10 dBm transmitters
    assert linear_to_db(p.tx_snr) == pytest.approx(107.8, abs=1e-9)
    assert p.pathloss_const / 25.0**4 == pytest.approx(10**-9.3, rel=1e-14)
    assert p.alpha == 4.0
    assert p.shadow_sigma == pytest.approx(8 * math.log(10) / 10)


def test_params_validation():
    with pytest.raises(ValueError, match="pathloss_exponent"):
        table_one_params(pathloss_exponent=2.0)
    with pytest.raises(ValueError, match="node_density"):
        table_one_params(node_density=0.0)
    with pytest.raises(ValueError, match="cone_angle"):
        table_one_params(cone_angle=7.0)


def test_with_tx_snr():
    p = table_one_params().with_tx_snr(123.0)
    assert p.tx_snr == pytest.approx(123.0, rel=1e-14)


def test_partial_fractions_small_cases():
    np.testing.assert_allclose(partial_fraction_coeffs([2 / 3, 1 / 3]), [2.0, -1.0], rtol=1e-14)
    np.testing.assert_allclose(partial_fraction_coeffs([4 / 7, 2 / 7, 1 / 7]),
                               [8 / 3, -2.0, 1 / 3], rtol=1e-13)
    assert partial_fraction_coeffs([1.0]).tolist() == [1.0]
    with pytest.raises(DegenerateProfileError):
        partial_fraction_coeffs([0.5, 0.5])


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6, unique=True))
def test_partial_fraction_expansion(a):
    a = np.array(a)
    if np.min(np.abs(np.subtract.outer(a, a)) + np.eye(a.size)) < 1e-3:
        return
    A = partial_fraction_coeffs(a)
    assert np.sum(A) == pytest.approx(1.0, abs=1e-9 * np.sum(np.abs(A)))
    # prod 1/(1 + t a_d) = sum A_d / (1 + t a_d)
    for t in (0.3, 2.0, 17.0):
        lhs = np.prod(1.0 / (1.0 + t * a))
        rhs = np.sum(A / (1.0 + t * a))
        assert rhs == pytest.approx(lhs, rel=1e-7, abs=1e-9 * np.sum(np.abs(A)) / (1 + t))


@pytest.mark.parametrize("bw, xi, D", [(1e6, 0.17e-6, 1), (4e6, 0.17e-6, 2), (10e6, 0.17e-6, 4),
                                       (10e6, 0.65e-6, 15), (1e6, 0.0, 1)])
def test_tap_counts(bw, xi, D):
    taps = build_tap_profile(bw, xi)
    assert taps.tap_count == D
    assert taps.powers.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(taps.powers) < 0)


def test_tap_powers_exponential():
    taps = build_tap_profile(4e6, 0.17e-6)
    x = 4e6 * 0.17e-6
    expected = np.array([1.0, math.exp(-1 / x)])
    np.testing.assert_allclose(taps.powers, expected / expected.sum(), rtol=1e-14)


@given(st.floats(0.05e-6, 1e-6), st.floats(1e6, 5e7), st.floats(1.01, 3.0))
def test_tap_count_nondecreasing_in_bandwidth(xi, bw, factor):
    assert build_tap_profile(bw * factor, xi).tap_count >= build_tap_profile(bw, xi).tap_count


def test_tap_profile_errors():
    with pytest.raises(ValueError):
        build_tap_profile(0.0, 1e-7)
    with pytest.raises(ValueError):
        build_tap_profile(1e6, -1.0)
    with pytest.raises(ValueError):
        TapProfile.from_powers([1.0, 0.0])


def test_lognormal_moment_against_quadrature():
    from scipy import integrate

    sigma = 8 * math.log(10) / 10
    for alpha in (3.0, 4.0, 5.5):
        b = 2 / alpha
        f = lambda z: math.exp(b * (sigma * z - sigma**2 / 2)) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
        val, _ = integrate.quad(f, -20, 20, epsabs=0, epsrel=1e-13)
        assert lognormal_moment(8.0, alpha) == pytest.approx(val, rel=1e-10)


def test_multipath_moment_against_quadrature():
    from scipy import integrate

    taps = TapProfile.from_powers([2 / 3, 1 / 3])
    # z = sum a_d E_d has density sum A_d exp(-z/a_d)/a_d
    A, a = taps.coeffs, taps.powers
    for alpha in (3.0, 4.0):
        b = 2 / alpha
        f = lambda z: z**b * float(np.sum(A * np.exp(-z / a) / a))
        val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12)
        assert multipath_moment(taps, alpha) == pytest.approx(val, rel=1e-10)
    long = build_tap_profile(30e6, 0.65e-6)         # ill-conditioned: integral route
    assert not long.well_conditioned
    assert 0.0 < multipath_moment(long, 4.0) < 1.0


@given(st.floats(2.05, 12.0))
def test_reflection_identity(alpha):
    b = 2 / alpha
    assert reflection_prefactor(alpha) == pytest.approx(math.gamma(1 - b) * math.gamma(1 + b), rel=1e-12)


def test_effective_densities_default():
    p = table_one_params()
    ed = effective_densities(p, TapProfile.flat())
    sigma = p.shadow_sigma
    expected = (0.5 * p.node_density * p.cone_angle * math.gamma(0.5)
                * math.sqrt(p.tx_snr * p.pathloss_const) * math.exp(-sigma**2 / 8))
    assert ed.lambda_hat == pytest.approx(expected, rel=1e-13)
    assert ed.lambda_bar == pytest.approx(expected * math.gamma(1.5), rel=1e-13)
    assert ed.lambda_hat == pytest.approx(4.17, abs=0.01)


@given(st.floats(1e-5, 1e-1), st.floats(1.0, 1e6))
def test_density_power_collapse(lam, scale):
    # lambda * p^(2/alpha) is the only combination that enters
    p = table_one_params(node_density=lam)
    q = p.replace(node_density=lam * scale).with_tx_snr(p.tx_snr / scale**2)
    taps = build_tap_profile(10e6, 0.17e-6)
    a, b = effective_densities(p, taps), effective_densities(q, taps)
    assert a.lambda_bar == pytest.approx(b.lambda_bar, rel=1e-12)
    assert a.lambda_hat == pytest.approx(b.lambda_hat, rel=1e-12)


def test_density_targets():
    p = table_one_params()
    taps = build_tap_profile(10e6, 0.17e-6)
    assert effective_densities(density_for_lambda_hat(p, 0.3), taps).lambda_hat == pytest.approx(0.3)
    assert effective_densities(density_for_lambda_bar(p, taps, 3.0), taps).lambda_bar == pytest.approx(3.0)
