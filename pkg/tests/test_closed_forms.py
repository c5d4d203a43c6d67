import math

import mpmath as mp
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from agmonlab import closed_forms as cf


@given(x=st.floats(-6, 27))
def test_erfc_matches_mpmath(x):
    assert cf.erfc(x) == pytest.approx(float(mp.erfc(x)), rel=1e-12, abs=1e-15)


@given(x=st.floats(0, 1e4))
def test_erfcx_matches_mpmath(x):
    ref = float(mp.exp(mp.mpf(x) ** 2) * mp.erfc(x))
    assert cf.erfcx(x) == pytest.approx(ref, rel=1e-12)


def test_erfc_at_zero_and_deep_tail():
    assert cf.erfc(0.0) == 1.0
    assert cf.erfc(30.0) == 0.0
    assert cf.erfc(-30.0) == 2.0


@given(y=st.floats(1e-300, 1.999999))
def test_erfc_inv_roundtrip(y):
    x = cf.erfc_inv(y)
    assert cf.erfc(x) == pytest.approx(y, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("nu", cf.SUPPORTED_NU)
@pytest.mark.parametrize("x", [0.05, 1.0, 30.0])
def test_bessel_k_half_matches_scipy(nu, x):
    assert cf.bessel_k_half(nu, x) == pytest.approx(special.kv(nu, x), rel=1e-13)


def test_bessel_rejects_unsupported():
    with pytest.raises(ValueError):
        cf.bessel_k_half(1.0, 1.0)
    with pytest.raises(ValueError):
        cf.bessel_k_half(0.5, 0.0)


@given(rho=st.floats(0.05, 8), T=st.floats(0.01, 20))
def test_truncated_mass_vs_quadrature(rho, T):
    ref, _ = integrate.quad(cf.passage_density, 0, T, args=(rho,), epsabs=0, epsrel=1e-12,
                            limit=200, points=[min(rho * rho / 6, T / 2)])
    got = cf.truncated_mass(cf.PassageParams(rho, T))
    assert got == pytest.approx(ref, rel=1e-7, abs=1e-300)


@given(rho=st.floats(0.05, 8), T=st.floats(0.01, 20))
def test_discounted_passage_vs_quadrature(rho, T):
    f = lambda t: math.exp(-t) * cf.passage_density(t, rho)
    ref, _ = integrate.quad(f, 0, T, epsabs=0, epsrel=1e-12, limit=200,
                            points=[min(rho * rho / 6, T / 2)])
    got = cf.discounted_passage(cf.PassageParams(rho, T))
    assert got == pytest.approx(ref, rel=1e-7, abs=1e-300)


@given(rho=st.floats(0.01, 50), T=st.floats(0.01, 200))
def test_discounted_passage_below_exp_minus_rho(rho, T):
    v = cf.discounted_passage(cf.PassageParams(rho, T))
    assert 0 <= v <= math.exp(-rho) * (1 + 1e-12)


def test_discounted_passage_large_T_limit():
    assert cf.discounted_passage(cf.PassageParams(3.0, 1e4)) == pytest.approx(math.exp(-3.0),
                                                                               rel=1e-12)


@given(rho=st.floats(0.1, 10), T=st.floats(0.05, 10))
def test_horizon_inverts_mass(rho, T):
    m = cf.truncated_mass(cf.PassageParams(rho, T))
    if 1e-250 < m < 1:
        assert cf.horizon_for_mass(rho, m) == pytest.approx(T, rel=1e-6)


def test_leading_order_log_mass_is_asymptotic():
    p = cf.PassageParams(20.0, 1.0)
    exact = -math.log(cf.truncated_mass(p))
    assert cf.leading_order_log_mass(p) == pytest.approx(exact, rel=1e-3)


@given(rho=st.floats(0.01, 30), T=st.floats(0.01, 30))
def test_exponent_gap_identity(rho, T):
    gap = cf.agmon_exponent_gap(rho, T)
    assert gap >= 0
    assert gap == pytest.approx(rho * rho / (4 * T) + T - rho, abs=1e-9 * (rho * rho / T + T))


@given(x=st.floats(0.01, 20), lam=st.floats(0.01, 5))
def test_brownian_discount_two_routes(x, lam):
    assert cf.brownian_discount(x, lam) == pytest.approx(cf.brownian_discount_closed(x, lam),
                                                         rel=1e-12)


def test_bessel_discount_displayed_form():
    # 2^{nu+1}/(Gamma(|nu|) x^nu) K_nu(x) evaluated literally
    ref = 2 ** 1.5 / (math.gamma(0.5) * 1.0) * special.kv(0.5, 1.0)
    assert cf.bessel_discount(0.5, 1.0) == pytest.approx(ref, rel=1e-13)
    assert cf.bessel_discount(0.5, 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-13)
    assert not cf.bessel_discount_flag(0.5, 1.0)
    assert cf.bessel_discount_flag(0.5, 0.1)


def test_passage_params_validation():
    with pytest.raises(ValueError):
        cf.PassageParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        cf.PassageParams(1.0, 0.0)
    assert cf.truncated_mass(cf.PassageParams(0.0, 1.0)) == 1.0


def test_oracle_suite_passes():
    checks = cf.oracle_checks()
    assert checks and all(c.passed for c in checks), [c for c in checks if not c.passed]
