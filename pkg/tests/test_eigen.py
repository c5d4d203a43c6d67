import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agmonlab.eigen import (apply_hamiltonian, boundary_decay, ground_state, hamiltonian_matrix,
                            rayleigh_quotient, solve_exterior_bvp)
from agmonlab.fields import PotentialSpec, ScalarField, build_grid, region_mask, sample_potential


def _box(n=65, dim=1, value=0.0):
    ext = [[0.0, 1.0]] * dim
    g = build_grid(ext, n)
    return sample_potential(PotentialSpec("constant", {"value": value}), g)


def test_matrix_matches_matrix_free():
    g = build_grid([[0, 1], [0, 2]], [9, 13])
    rng = np.random.default_rng(0)
    V = ScalarField(g, rng.uniform(0, 5, g.shape))
    v = np.zeros(g.shape)
    v[1:-1, 1:-1] = rng.normal(size=(7, 11))
    A, idx = hamiltonian_matrix(V)
    free = apply_hamiltonian(V, ScalarField(g, v)).values.ravel()[idx]
    assert np.allclose(A @ v.ravel()[idx], free)
    assert abs(A - A.T).max() == 0


@pytest.mark.parametrize("n", [33, 65, 129])
def test_particle_in_box_1d(n):
    """Discrete ground energy of -1/2 d^2/dx^2 on [0,1] is (1 - cos(pi h)) / h^2."""
    V = _box(n)
    h = V.grid.h[0]
    pair = ground_state(V, tol=1e-10)
    assert pair.lam == pytest.approx((1 - math.cos(math.pi * h)) / h ** 2, rel=1e-9)
    assert pair.lam == pytest.approx(math.pi ** 2 / 2, rel=2 * h * h)
    assert np.abs(pair.u.values).max() == pytest.approx(1.0)
    assert pair.normalization == "sup-norm-one"


def test_particle_in_box_2d_with_shift():
    V = _box(33, dim=2, value=1.5)
    h = V.grid.h[0]
    pair = ground_state(V, tol=1e-9)
    assert pair.lam == pytest.approx(2 * (1 - math.cos(math.pi * h)) / h ** 2 + 1.5, rel=1e-8)
    assert rayleigh_quotient(V, pair.u) == pytest.approx(pair.lam, rel=1e-9)
    assert pair.u.values.min() >= -1e-12


def test_ground_state_deterministic():
    V = _box(41)
    a, b = ground_state(V), ground_state(V)
    assert a.lam == b.lam and np.array_equal(a.u.values, b.u.values)


@given(x_max=st.floats(3.0, 8.0), n=st.sampled_from([801, 1601]))
def test_exterior_bvp_exact_1d(x_max, n):
    """V = 1/2, E = {0}: the discrete solution tracks sinh((L - x)) / sinh(L) to O(h^2)."""
    g = build_grid([[0.0, x_max]], n)
    V = sample_potential(PotentialSpec("exact_1d", {"value": 0.5}), g)
    mask = region_mask(V, 0.0)
    u = solve_exterior_bvp(V, 0.0, mask)
    x = g.axes()[0]
    exact = np.sinh(x_max - x) / math.sinh(x_max)
    h = g.h[0]
    assert np.abs(u.values - exact).max() <= 0.1 * h * h * x_max


def test_exterior_bvp_maximum_principle():
    g = build_grid([[-2, 2], [-2, 2]], 61)
    V = sample_potential(PotentialSpec("radial_shell", {"c": 3.0, "radius": 1.0}), g)
    mask = region_mask(V, 0.0)
    u = solve_exterior_bvp(V, 0.0, mask)
    assert u.values[mask.forbidden].max() < 1.0
    assert u.values[mask.forbidden].min() > 0.0


def test_boundary_decay_certificate():
    g = build_grid([[0.0, 20.0]], 2001)
    V = sample_potential(PotentialSpec("exact_1d", {"value": 0.5}), g)
    mask = region_mask(V, 0.0)
    u = solve_exterior_bvp(V, 0.0, mask)
    assert boundary_decay(u, mask) < 1e-8


def test_grid_mismatch_raises():
    with pytest.raises(ValueError):
        apply_hamiltonian(_box(9), _box(11))
