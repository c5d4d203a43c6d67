import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from agmonlab.agmon import bubble, fmm_distance, forbidden_domain
from agmonlab.fields import PotentialSpec, ScalarField, build_grid, region_mask, sample_potential
from agmonlab.stochastic import (ExitClass, expected_discount, harmonic_measure_mc,
                                 harmonic_measure_pde, normal_block, simulate_exit, stream_key,
                                 time_change_equivalence, uniform_block)


def _exact_1d(x_max=6.0, n=601):
    g = build_grid([[0.0, x_max]], n)
    V = sample_potential(PotentialSpec("exact_1d", {"value": 0.5}), g)
    return V, region_mask(V, 0.0)


# ------------------------------------------------------------------ RNG

def test_normals_pass_ks_and_moments():
    z = normal_block(7, 3, 200_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 5 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 0.02
    # ziggurat tail beyond the base strip
    tail = np.mean(np.abs(z) > 3.442619855899)
    assert tail == pytest.approx(2 * stats.norm.sf(3.442619855899), rel=0.35)


def test_uniforms_in_open_interval():
    u = uniform_block(1, 0, 100_000)
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3


@given(seed=st.integers(0, 2**40), a=st.integers(0, 10**6), b=st.integers(0, 10**6))
def test_streams_are_distinct_and_reproducible(seed, a, b):
    assert np.array_equal(normal_block(seed, a, 8), normal_block(seed, a, 8))
    if a != b:
        assert stream_key(seed, a) != stream_key(seed, b)
        assert not np.array_equal(uniform_block(seed, a, 4), uniform_block(seed, b, 4))


def test_replica_streams_uncorrelated():
    a = np.array([normal_block(0, r, 1)[0] for r in range(20000)])
    b = np.array([normal_block(0, r, 2)[1] for r in range(20000)])
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03
    assert stats.kstest(a, "norm").pvalue > 1e-3


# ------------------------------------------------------------------ walks

def test_simulate_exit_deterministic_and_classified():
    V, mask = _exact_1d()
    a = simulate_exit(V, 0.0, mask, (1.0,), 1e-3, 1e3, 5, replica=2)
    b = simulate_exit(V, 0.0, mask, (1.0,), 1e-3, 1e3, 5, replica=2)
    assert a == b
    assert a.exit_class in (ExitClass.HIT_E, ExitClass.HIT_OUTER)
    # tau = (V - lam) * sigma for constant V - lam = 1/2
    assert a.agmon_clock == pytest.approx(0.5 * a.euclid_time, rel=1e-9)


def test_simulate_exit_timeout():
    V, mask = _exact_1d()
    e = simulate_exit(V, 0.0, mask, (3.0,), 1e-3, 1e-2, 0)
    assert e.exit_class == ExitClass.TIMEOUT


def test_start_in_allowed_set_is_immediate():
    V, mask = _exact_1d()
    est = expected_discount(V, 0.0, mask, (0.0,), 200, 1e-3, 10.0, 0)
    assert est.value == 1.0 and est.stderr == 0.0


def test_harmonic_measure_interval():
    """Brownian exit from (0, L) through 0 has probability 1 - x/L."""
    V, mask = _exact_1d(x_max=4.0, n=401)
    dom = forbidden_domain(mask)
    est = harmonic_measure_mc(dom, (1.0,), 20000, 1e-4, 1e3, 11, mask=mask)
    assert abs(est.value - 0.75) <= 3 * est.stderr + 2 * V.grid.h[0]
    pde = harmonic_measure_pde(dom, tol=1e-12)
    x = V.grid.axes()[0]
    assert np.allclose(pde.values, 1 - x / 4.0, atol=1e-9)


def test_mc_reproducible():
    V, mask = _exact_1d(x_max=3.0, n=301)
    dom = forbidden_domain(mask)
    a = harmonic_measure_mc(dom, (1.0,), 500, 1e-3, 100, 3)
    b = harmonic_measure_mc(dom, (1.0,), 500, 1e-3, 100, 3)
    assert a == b


@pytest.mark.parametrize("mode,n", [("kill", 20000), ("weight", 4000)])
def test_expected_discount_1d(mode, n):
    # weight-mode walks run until they leave the box, hence fewer of them
    V, mask = _exact_1d(x_max=8.0, n=801)
    est = expected_discount(V, 0.0, mask, (1.0,), n, 1e-4, 1e3, 1, mode=mode)
    # the finite box removes the mass of paths reaching x = 8; e^{-1} minus that is tiny
    ref = math.sinh(7.0) / math.sinh(8.0)
    assert abs(est.value - ref) <= 3 * est.stderr + 0.01
    assert est.stderr < 0.01


def test_time_changed_discount_1d():
    V, mask = _exact_1d(x_max=8.0, n=801)
    est = expected_discount(V, 0.0, mask, (1.0,), 20000, 1e-4, 1e3, 2, time_change=True)
    assert abs(est.value - math.sinh(7.0) / math.sinh(8.0)) <= 3 * est.stderr + 0.01


def test_expected_discount_validation():
    V, mask = _exact_1d()
    with pytest.raises(ValueError):
        expected_discount(V, 0.0, mask, (1.0,), 10, 1e-3, 10, 0)
    with pytest.raises(ValueError):
        expected_discount(V, 0.0, mask, (1.0,), 200, 1e-3, 10, 0, mode="other")
    with pytest.raises(ValueError):
        expected_discount(V, 0.0, mask, (1.0,), 200, -1.0, 10, 0)


def test_timeout_fraction_reported():
    V, mask = _exact_1d()
    est = harmonic_measure_mc(forbidden_domain(mask), (3.0,), 200, 1e-3, 0.01, 0)
    assert est.timeout_fraction == 1.0 and est.warning


# ------------------------------------------------------------------ PDE

def test_pde_disk_annulus_log_profile():
    """Harmonic measure of the inner circle in an annulus is log(R/r)/log(R/a)."""
    g = build_grid([[-1, 1], [-1, 1]], 161)
    X, Y = g.coords()
    r = np.hypot(X, Y)
    V = ScalarField(g, np.where(r <= 0.2, 0.0, 1.0))
    mask = region_mask(V, 0.0)
    codes = np.array(mask.classes)
    codes[(r >= 0.9) & ~g.boundary_mask()] = 2  # OUTER ring as the far exit
    from agmonlab.fields import RegionMask
    mask = RegionMask(g, codes)
    dom = forbidden_domain(mask)
    u = harmonic_measure_pde(dom, tol=1e-11)
    sel = mask.forbidden & (r > 0.35) & (r < 0.75)
    exact = np.log(0.9 / r[sel]) / np.log(0.9 / 0.2)
    assert np.abs(u.values[sel] - exact).max() < 0.03


def test_pde_mc_agree_in_2d_bubble():
    g = build_grid([[-1.5, 1.5], [-1.5, 1.5]], 61)
    V = sample_potential(PotentialSpec("radial_shell", {"c": 2.0}), g)
    mask = region_mask(V, 0.0)
    d = fmm_distance(V, 0.0, mask)
    b = bubble(d, 1.0)
    pde = harmonic_measure_pde(b)
    p = (0.6, 0.1)
    idx = g.nearest_node(p)
    est = harmonic_measure_mc(b, g.index_to_coord(idx), 8000, 2e-4, 100, 9)
    assert abs(est.value - pde.values[idx]) <= 3 * est.stderr + 2 * g.hmin


def test_time_change_equivalence_radial():
    g = build_grid([[-1.5, 1.5], [-1.5, 1.5]], 61)
    X, Y = g.coords()
    V = ScalarField(g, np.where(np.hypot(X, Y) <= 1, 1.0 + X ** 2, 0.0))
    mask = region_mask(V, 0.0)
    b = bubble(fmm_distance(V, 0.0, mask), 0.9)
    rep = time_change_equivalence(b, V, 0.0, (0.5, 0.0), 6000, 2e-4, 100, 4, mask=mask)
    assert rep.passed, rep


def test_first_passage_median_standard_clock():
    """Level-1 passage of standard Brownian motion has P(sigma <= t) = erfc(1 / sqrt(2 t))."""
    V, mask = _exact_1d(x_max=20.0, n=2001)
    t_med = 1.0 / (2.0 * special.erfcinv(0.5) ** 2)
    assert t_med == pytest.approx(2.198, abs=1e-3)
    est = harmonic_measure_mc(forbidden_domain(mask), (1.0,), 4000, 1e-3, t_med, 8, mask=mask)
    se = math.sqrt(0.25 / est.n)
    assert abs(est.timeout_fraction - 0.5) <= 3 * se + 0.01
