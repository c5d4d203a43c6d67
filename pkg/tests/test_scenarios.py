import math

import numpy as np
import pytest

from agmonlab.eigen import boundary_decay
from agmonlab.scenarios import (CONSTRUCTORS, EIGENSOLVE, build_scenario, champagne, radius_sum,
                                sample_forbidden_points, scenario_from_json, scenario_to_json)

NAMES = sorted(CONSTRUCTORS)


@pytest.mark.parametrize("name", NAMES)
def test_constructor_shape(name):
    sc = CONSTRUCTORS[name]()
    assert sc.name == name
    assert sc.query_points and all(sc.grid.contains(p) for p in sc.query_points)
    assert sc.lambda_source == EIGENSOLVE or math.isfinite(sc.lambda_source)
    assert not (sc.walled and sc.open_boundary)


@pytest.mark.parametrize("name", NAMES)
def test_json_roundtrip(name):
    sc = CONSTRUCTORS[name]()
    back = scenario_from_json(scenario_to_json(sc))
    assert back.potential == sc.potential
    assert back.grid.to_dict() == sc.grid.to_dict()
    assert back.lambda_source == sc.lambda_source and back.walled == sc.walled
    assert scenario_to_json(back) == scenario_to_json(sc)


def test_boundary_flags():
    assert CONSTRUCTORS["strip"]().open_boundary
    assert CONSTRUCTORS["four_squares"]().walled and CONSTRUCTORS["champagne"]().walled
    for name in ("exact_1d", "radial_shell", "tendril"):
        sc = CONSTRUCTORS[name]()
        assert not sc.walled and not sc.open_boundary


def test_build_scenario_overrides():
    sc = build_scenario("strip", params={"epsilon": 0.05}, grid={"extent": [[-4, 8], [-2, 2]],
                                                                  "n": [49, 17]}, delta=0.1)
    assert sc.potential.params["epsilon"] == 0.05
    assert sc.grid.shape == (49, 17) and sc.delta == 0.1
    # query points outside the smaller box are dropped
    assert all(sc.grid.contains(p) for p in sc.query_points)
    assert len(sc.query_points) < len(CONSTRUCTORS["strip"]().query_points)
    with pytest.raises(ValueError):
        build_scenario("nowhere")


@pytest.mark.parametrize("law", ["equal", "geometric"])
def test_champagne_radius_sum(law):
    sc = champagne(bubble_count=16, radius_law=law, radius_sum=0.6)
    assert radius_sum(sc) == pytest.approx(0.6, rel=1e-12)


@pytest.mark.parametrize("name", ["exact_1d", "radial_shell", "tendril"])
def test_truncation_certificate(name, solved):
    st = solved(name)
    assert boundary_decay(st.u, st.mask) < 1e-8


@pytest.mark.parametrize("name", NAMES)
def test_query_points_forbidden(name, solved):
    st = solved(name)
    for p in st.scenario.query_points:
        assert st.mask.forbidden[st.grid.nearest_node(p)], p


def test_sampled_points_avoid_walls(solved):
    st = solved("champagne")
    pts = sample_forbidden_points(st, 50, seed=1)
    assert len(pts) == 50
    assert len(set(pts)) == 50
    for p in pts:
        idx = st.grid.nearest_node(p)
        assert st.mask.forbidden[idx]
        assert st.V.values[idx] < st.scenario.potential.v_cap
    assert pts == sample_forbidden_points(st, 50, seed=1)


def test_eigensolve_scenario_has_pair(solved):
    st = solved("four_squares")
    assert st.eig is not None and st.lam < np.pi ** 2
    assert st.u_sup == pytest.approx(1.0)
