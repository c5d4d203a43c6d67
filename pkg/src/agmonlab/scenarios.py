"""Worked examples: potentials, canonical grids, energies and query points."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .agmon import (DistanceField, DistanceLaplacian, distance_laplacian, fmm_distance,
                    forbidden_domain)
from .eigen import EigenPair, ground_state, solve_exterior_bvp
from .fields import (DEFAULT_V_CAP, Grid, PotentialSpec, RegionMask, ScalarField, build_grid,
                     champagne_bubbles, region_mask, sample_potential)
from .stochastic import harmonic_measure_pde

EIGENSOLVE = "eigensolve"


@dataclass(frozen=True)
class Scenario:
    name: str
    potential: PotentialSpec
    grid: Grid
    lambda_source: float | str
    query_points: tuple[tuple[float, ...], ...]
    expected_properties: tuple[str, ...] = ()
    delta: float = 0.0
    open_boundary: bool = False
    alpha_ref: float | None = None  # bubble level used for harmonic-measure diagnostics
    fk_dt: float = 1e-4             # Agmon-clock step of the time-changed Feynman-Kac walk
    walled: bool = False            # box walls are part of the model (V = inf), not a cut

    def to_config(self) -> dict:
        return {"scenario": self.name, "params": dict(self.potential.params),
                "grid": self.grid.to_dict(),
                "lambda": self.lambda_source, "delta": self.delta}


@dataclass(frozen=True)
class ScenarioState:
    """A scenario with its potential, energy, solution and distance fields."""

    scenario: Scenario
    V: ScalarField
    lam: float
    mask: RegionMask
    u: ScalarField
    u_sup: float
    boundary_sup: float
    dist: DistanceField
    dlap: DistanceLaplacian
    mask_delta: RegionMask
    dist_delta: DistanceField
    omega_full: ScalarField
    eig: EigenPair | None = None

    @property
    def grid(self) -> Grid:
        return self.V.grid

    @property
    def delta(self) -> float:
        return self.scenario.delta


def _pot(kind, params, lam=0.0) -> PotentialSpec:
    return PotentialSpec(kind, params, lam, DEFAULT_V_CAP)


def exact_1d(x_max: float = 20.0, n: int = 4001) -> Scenario:
    """V = 1/2 on (0, x_max], E = {0}, lambda = 0; u = e^{-x} up to truncation."""
    g = build_grid([[0.0, x_max]], n)
    return Scenario("exact_1d", _pot("exact_1d", {"value": 0.5}), g, 0.0,
                    ((0.5,), (1.0,), (2.0,)),
                    ("rho_equals_x", "laplacian_zero", "u_equals_exp"), fk_dt=1e-4)


def strip(epsilon: float = 0.01, box=((-8.0, 24.0), (-4.0, 4.0)), n=(513, 129)) -> Scenario:
    """V = epsilon + y^2 outside the unit disk, V = 0 inside, lambda = 0."""
    g = build_grid([list(b) for b in box], n)
    q = tuple((float(x), 0.0) for x in (2, 4, 6, 8, 10))
    return Scenario("strip", _pot("strip", {"epsilon": epsilon, "radius": 1.0}), g, 0.0, q,
                    ("bubble_in_strip", "axis_rate", "alpha_two_thirds"), open_boundary=True,
                    alpha_ref=3.0, fk_dt=1e-4)


def four_squares(m: float = 100.0, n: int = 257) -> Scenario:
    """Four unit squares with V = 0, 10, m, m; walls of the 2x2 box stand in for V = inf."""
    g = build_grid([[0.0, 2.0], [0.0, 2.0]], n)
    return Scenario("four_squares", _pot("four_squares", {"m": float(m)}), g, EIGENSOLVE,
                    ((0.5, 0.5),), ("lambda_below_pi2", "rho_bounded_in_m", "omega_small"),
                    alpha_ref=3.0, fk_dt=1e-4, walled=True)


def champagne(bubble_count: int = 8, radius_law: str = "equal", radius_sum: float = 0.8,
              n: int = 321, c: float = 2.0) -> Scenario:
    """Annulus 0.25 < r <= 1 with V = c, studded with V = v_cap disks on the ring r = 0.55."""
    params = {"bubble_count": int(bubble_count), "radius_law": radius_law,
              "radius_sum": float(radius_sum), "ring_radius": 0.55, "inner_radius": 0.25,
              "outer_radius": 1.0, "c": float(c)}
    g = build_grid([[-1.0, 1.0], [-1.0, 1.0]], n)
    return Scenario("champagne", _pot("champagne", params), g, 0.0, ((0.85, 0.0),),
                    ("radius_sum", "omega_drops_with_count", "rho_stable"), alpha_ref=4.0,
                    fk_dt=1e-4, walled=True)


def radial_shell(c: float = 2.0, n: int = 241) -> Scenario:
    """V - lambda = c inside the unit disk, E outside it."""
    g = build_grid([[-1.5, 1.5], [-1.5, 1.5]], n)
    return Scenario("radial_shell", _pot("radial_shell", {"c": float(c), "radius": 1.0}), g, 0.0,
                    ((0.0, 0.0), (0.3, 0.0), (0.5, 0.4)),
                    ("rho_radial", "laplacian_negative", "theorem3_invalid"), fk_dt=1e-4)


def tendril(c: float = 8.0, h: float = 1.0 / 32.0) -> Scenario:
    """Disk blob at (-1, 0) plus a thin spike toward x = 1, V - lambda = c elsewhere."""
    box = [[-6.0, 5.5], [-5.0, 5.0]]
    n = [int(round((b - a) / h)) + 1 for a, b in box]
    params = {"c": float(c), "blob_center": [-1.0, 0.0], "blob_radius": 0.6,
              "spike_x": [-0.4, 1.0], "spike_halfwidth": 0.06}
    g = build_grid(box, n)
    return Scenario("tendril", _pot("tendril", params), g, 0.0, ((1.5, 0.0),),
                    ("laplacian_positive_near_tip", "spike_invisible"), alpha_ref=3.0,
                    fk_dt=1e-4)


CONSTRUCTORS = {
    "exact_1d": exact_1d,
    "strip": strip,
    "four_squares": four_squares,
    "champagne": champagne,
    "radial_shell": radial_shell,
    "tendril": tendril,
}

# constructor keyword for each potential parameter that maps one-to-one
_PARAM_ALIASES = {
    "exact_1d": {},
    "strip": {"epsilon": "epsilon"},
    "four_squares": {"m": "m"},
    "champagne": {"bubble_count": "bubble_count", "radius_law": "radius_law",
                  "radius_sum": "radius_sum", "c": "c"},
    "radial_shell": {"c": "c"},
    "tendril": {"c": "c"},
}


def build_scenario(name: str, params: dict | None = None, grid: dict | None = None,
                   lam: float | str | None = None, delta: float | None = None) -> Scenario:
    """Scenario from a name plus optional parameter, grid, energy and delta overrides."""
    if name not in CONSTRUCTORS:
        raise ValueError(f"unknown scenario {name!r}; known: {sorted(CONSTRUCTORS)}")
    params = dict(params or {})
    kwargs = {}
    aliases = _PARAM_ALIASES[name]
    for k, v in params.items():
        if k in aliases:
            kwargs[aliases[k]] = v
    sc = CONSTRUCTORS[name](**kwargs)
    pot = sc.potential
    if params:
        merged = dict(pot.params)
        merged.update(params)
        pot = PotentialSpec(pot.kind, merged, pot.lam, pot.v_cap)
    g = sc.grid
    if grid:
        g = build_grid(grid["extent"], grid["n"])
    lam_src = sc.lambda_source if lam is None else lam
    d = sc.delta if delta is None else float(delta)
    q = tuple(p for p in sc.query_points if g.contains(p))
    return Scenario(sc.name, pot, g, lam_src, q, sc.expected_properties, d, sc.open_boundary,
                    sc.alpha_ref, sc.fk_dt, sc.walled)


def scenario_from_config(cfg: dict) -> Scenario:
    return build_scenario(cfg["scenario"], cfg.get("params"), cfg.get("grid"),
                          cfg.get("lambda"), cfg.get("delta"))


def scenario_to_json(sc: Scenario) -> str:
    return json.dumps(sc.to_config(), sort_keys=True)


def scenario_from_json(text: str) -> Scenario:
    return scenario_from_config(json.loads(text))


def solve_scenario(sc: Scenario, eig_tol: float = 1e-8, pde_tol: float = 1e-10) -> ScenarioState:
    """Energy, solution, Agmon distances (for E and E_delta) and the full harmonic measure.

    Fixed-energy scenarios solve the exterior problem u = 1 on E, u = 0 on the box;
    ``eigensolve`` scenarios take the sup-normalised ground state.
    """
    V = sample_potential(sc.potential, sc.grid)
    eig = None
    if sc.lambda_source == EIGENSOLVE:
        eig = ground_state(V, tol=eig_tol)
        lam = eig.lam
        mask = region_mask(V, lam, 0.0)
        u = eig.u
    else:
        lam = float(sc.lambda_source)
        mask = region_mask(V, lam, 0.0)
        u = solve_exterior_bvp(V, lam, mask)
    u_sup = float(np.abs(u.values).max())
    rim = mask.boundary_of_allowed()
    boundary_sup = float(np.abs(u.values[rim]).max()) if rim.any() else u_sup
    dist = fmm_distance(V, lam, mask)
    dlap = distance_laplacian(dist)
    if sc.delta > 0:
        mask_d = region_mask(V, lam, sc.delta)
        dist_d = fmm_distance(V, lam, mask_d)
    else:
        mask_d, dist_d = mask, dist
    omega_full = harmonic_measure_pde(forbidden_domain(mask_d), tol=pde_tol)
    return ScenarioState(sc, V, lam, mask, u, u_sup, boundary_sup, dist, dlap, mask_d, dist_d,
                         omega_full, eig)


def sample_forbidden_points(state: ScenarioState, count: int, seed: int,
                            min_u: float = 0.0) -> list[tuple[float, ...]]:
    """Random forbidden interior nodes (without replacement), optionally with |u| >= min_u.

    Nodes at the cap value are walls rather than forbidden region and are skipped.
    """
    g = state.grid
    wall = state.V.values >= state.scenario.potential.v_cap
    ok = state.mask.forbidden & ~wall & ~g.boundary_mask() & (np.abs(state.u.values) >= min_u)
    idx = np.argwhere(ok)
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(idx), size=min(count, len(idx)), replace=False)
    return [g.index_to_coord(tuple(idx[k])) for k in sorted(pick)]


def radius_sum(sc: Scenario) -> float:
    return float(sum(r for _, _, r in champagne_bubbles(sc.potential.params)))
