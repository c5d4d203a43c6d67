"""Pointwise decay bounds for |u| and their comparison with the computed solution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy import ndimage

from .agmon import BubbleClass, DistanceField, DistanceLaplacian, bubble
from .fields import ScalarField, gradient_norm
from .stochastic import MeasureEstimate, expected_discount, harmonic_measure_pde

if TYPE_CHECKING:
    from .scenarios import ScenarioState


class SoundnessError(AssertionError):
    """A bound marked valid fell below |u| by more than the numerical slack."""

    def __init__(self, message: str, violations: list[dict]):
        super().__init__(message)
        self.violations = violations


def default_alpha_grid(lo: float = 0.1, hi: float = 100.0, n: int = 32) -> tuple[float, ...]:
    return tuple(float(a) for a in np.geomspace(lo, hi, n))


@dataclass(frozen=True)
class BoundConfig:
    c_eps: float = 1.0
    eps: float = 0.1
    alpha_grid: tuple[float, ...] = field(default_factory=default_alpha_grid)
    delta: float = 0.0
    sharp_factor: float = 0.5

    def __post_init__(self):
        if not self.c_eps > 0:
            raise ValueError("c_eps must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        grid = tuple(float(a) for a in self.alpha_grid)
        if not grid:
            raise ValueError("alpha_grid must be nonempty")
        if any(a <= 0 for a in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha_grid must be positive and strictly increasing")
        object.__setattr__(self, "alpha_grid", grid)
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")


@dataclass(frozen=True)
class BoundReport:
    point: tuple[float, ...]
    u_abs: float
    rho: float
    agmon_bound: float
    delta_rho_flag: bool
    thm1_value: float
    thm1_alpha_star: float
    omega_at_alpha_star: float
    thm1_certified: float
    fk_value: float
    fk_stderr: float
    fk_bound: float
    fk_valid: bool
    tube_lhs: float
    tube_rhs: float
    trivial_lhs: float
    slack: float

    def row(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------- theorem 3

@dataclass(frozen=True)
class AgmonBound:
    bound: ScalarField
    valid: np.ndarray


def _components_all_flagged(dist: DistanceField, dlap: DistanceLaplacian) -> np.ndarray:
    """Forbidden nodes whose connected forbidden component is flagged throughout."""
    forb = dist.source.forbidden
    labels, count = ndimage.label(forb)
    ok = np.zeros(forb.shape, dtype=bool)
    checked = dlap.lap.valid & forb
    for k in range(1, count + 1):
        comp = labels == k
        if np.all(dlap.flag[comp & checked]):
            ok |= comp
    return ok


def agmon_pointwise_bound(dist: DistanceField, boundary_sup: float,
                          dlap: DistanceLaplacian) -> AgmonBound:
    """boundary_sup * e^{-rho}, valid where the forbidden component has Lap rho >= 0.

    The comparison argument behind the bound runs over a whole forbidden
    component, so a single unflagged node (or a cut-locus node) invalidates it.
    """
    if not boundary_sup > 0:
        raise ValueError("boundary_sup must be positive")
    b = boundary_sup * np.exp(-dist.rho.values)
    valid = _components_all_flagged(dist, dlap) | dist.source.allowed
    return AgmonBound(ScalarField(dist.grid, b), valid)


# --------------------------------------------------------------- theorem 1

@dataclass(frozen=True)
class Theorem1Result:
    value: float
    alpha_star: float
    omega_star: float
    admissible: int


def theorem1_bound(x, dist: DistanceField, measure_fn: Callable[[float], float],
                   cfg: BoundConfig, u_sup: float = 1.0) -> Theorem1Result:
    """min over alpha > rho(x) of c_eps e^{-(1-eps) alpha} + omega(alpha) ||u||."""
    rho_x = dist.at(x)
    best = None
    n = 0
    for a in cfg.alpha_grid:
        if a <= rho_x:
            continue
        n += 1
        w = float(measure_fn(a))
        val = cfg.c_eps * math.exp(-(1.0 - cfg.eps) * a) + w * u_sup
        if best is None or val < best[0]:
            best = (val, a, w)
    if best is None:
        raise ValueError(f"no admissible alpha: every grid value is <= rho(x) = {rho_x:.4g}")
    return Theorem1Result(best[0], best[1], best[2], n)


class BubbleMeasureCache:
    """Harmonic measure of the allowed set in each bubble, one SOR field per alpha."""

    def __init__(self, dist: DistanceField, tol: float = 1e-9):
        self.dist = dist
        self.tol = tol
        self._fields: dict[float, ScalarField] = {}
        self._bubbles = {}
        self._last: ScalarField | None = None

    def bubble(self, alpha: float):
        if alpha not in self._bubbles:
            self._bubbles[alpha] = bubble(self.dist, alpha)
        return self._bubbles[alpha]

    def field(self, alpha: float) -> ScalarField:
        if alpha not in self._fields:
            f = harmonic_measure_pde(self.bubble(alpha), tol=self.tol, warm=self._last)
            self._fields[alpha] = f
            self._last = f
        return self._fields[alpha]

    def at(self, alpha: float, idx) -> float:
        return float(self.field(alpha).values[tuple(idx)])


def theorem1_certified(idx, cache: BubbleMeasureCache, u: ScalarField, u_sup: float,
                       alphas: Sequence[float]) -> tuple[float, float]:
    """min over alpha of omega(alpha) ||u|| + max |u| on the rest of the bubble boundary.

    This is the maximum-principle step of Theorem 1 with the Agmon term replaced
    by the measured boundary values, so it carries no unknown constant.
    """
    rho_x = cache.dist.rho.values[tuple(idx)]
    best = (math.inf, math.nan)
    absu = np.abs(u.values)
    for a in alphas:
        if a <= rho_x:
            continue
        b = cache.bubble(a)
        if not b.inside[tuple(idx)]:
            continue
        rim = (b.classes == BubbleClass.BOUNDARY_ALPHA) | (b.classes == BubbleClass.BOUNDARY_OUTER)
        sup_rim = float(absu[rim].max()) if rim.any() else 0.0
        val = cache.at(a, idx) * u_sup + sup_rim
        if val < best[0]:
            best = (val, a)
    return best


# --------------------------------------------------------------- theorem 4

MIN_FK_HITS = 10


def theorem4_valid(discount: MeasureEstimate) -> bool:
    """The 3-sigma upper value needs a usable normal approximation: at least 10 hits."""
    return bool(discount.counts) and discount.counts[0] >= MIN_FK_HITS


def theorem4_bound(discount: MeasureEstimate, boundary_sup: float) -> float:
    """boundary_sup * (value + 3 stderr + timeout ceiling), capped at boundary_sup."""
    raw = discount.value + 3.0 * discount.stderr + discount.timeout_ceiling
    return boundary_sup * min(1.0, max(0.0, raw))


# --------------------------------------------------------------- theorem 2

@dataclass(frozen=True)
class TubeReport:
    sharp: np.ndarray
    omega: np.ndarray
    root_agmon: np.ndarray
    c_tube: float
    min_ratio_sharp: float
    trivial_ok: np.ndarray

    @property
    def consistent(self) -> bool:
        return not np.any(self.sharp & (self.omega < 0.01 * self.root_agmon))


def tube_check(u_abs, omega_full, rho_delta, u_sup: float = 1.0, sharp_factor: float = 0.5,
               slack=0.0) -> TubeReport:
    """Sharpness, the square-root tube condition and the trivial omega >~ |u| direction."""
    u_abs = np.atleast_1d(np.asarray(u_abs, dtype=float))
    omega = np.atleast_1d(np.asarray(omega_full, dtype=float))
    rho = np.atleast_1d(np.asarray(rho_delta, dtype=float))
    agm = np.exp(-rho)
    root = np.sqrt(agm)
    sharp = u_abs >= sharp_factor * agm
    ratio = omega / root
    c_tube = float(ratio[sharp].min()) if sharp.any() else math.nan
    trivial = omega >= 0.1 * u_abs / u_sup - np.asarray(slack)
    return TubeReport(sharp, omega, root, c_tube, c_tube, trivial)


# --------------------------------------------------------------- report

def _local_gradient(gradu: np.ndarray, idx) -> float:
    sl = tuple(slice(max(i - 1, 0), i + 2) for i in idx)
    return float(gradu[sl].max())


def bound_report(state: "ScenarioState", points, cfg: BoundConfig | None = None,
                 n_samples: int = 4000, dt: float | None = None, t_max: float = 1e4,
                 seed: int = 0, check: bool = True, alpha_cache: BubbleMeasureCache | None = None,
                 fk: bool = True) -> list[BoundReport]:
    """All bounds at each point (snapped to the nearest node), with a soundness check.

    The discount is estimated with the time-changed walk, whose clock advances by
    ``dt`` per step (default: the scenario's ``fk_dt``).
    """
    cfg = cfg or BoundConfig(delta=state.delta)
    g = state.grid
    u = state.u
    absu = np.abs(u.values)
    gradu = gradient_norm(u)
    dist = state.dist
    cache = alpha_cache or BubbleMeasureCache(dist)
    ab = agmon_pointwise_bound(dist, state.boundary_sup, state.dlap)
    omega_full = state.omega_full.values
    dt = dt if dt is not None else state.scenario.fk_dt
    reports, violations = [], []
    for k, p in enumerate(points):
        idx = g.nearest_node(p)
        pt = g.index_to_coord(idx)
        if not state.mask.forbidden[idx]:
            raise ValueError(f"point {tuple(p)} is not in the forbidden region")
        ua = float(absu[idx])
        rho = float(dist.rho.values[idx])
        t1 = theorem1_bound(pt, dist, lambda a: cache.at(a, idx), cfg, state.u_sup)
        cert, _ = theorem1_certified(idx, cache, u, state.u_sup, cfg.alpha_grid)
        if fk:
            est = expected_discount(state.V, state.lam, state.mask, pt, n_samples, dt, t_max,
                                    seed + k, time_change=True)
            b4 = theorem4_bound(est, state.boundary_sup)
            v4 = theorem4_valid(est)
        else:
            est = MeasureEstimate(math.nan, 0.0, 0, seed + k, 0.0)
            b4 = math.nan
            v4 = False
        rho_d = float(state.dist_delta.rho.values[idx])
        slack_num = 5.0 * g.hmin * _local_gradient(gradu, idx)
        rep = BoundReport(
            point=tuple(float(c) for c in pt), u_abs=ua, rho=rho,
            agmon_bound=float(ab.bound.values[idx]), delta_rho_flag=bool(ab.valid[idx]),
            thm1_value=t1.value, thm1_alpha_star=t1.alpha_star, omega_at_alpha_star=t1.omega_star,
            thm1_certified=cert, fk_value=est.value, fk_stderr=est.stderr, fk_bound=b4, fk_valid=v4,
            tube_lhs=float(omega_full[idx]), tube_rhs=math.sqrt(math.exp(-rho_d)),
            trivial_lhs=float(omega_full[idx]), slack=slack_num)
        reports.append(rep)
        checks = [("theorem1", cert, 0.0)]
        if rep.delta_rho_flag:
            checks.append(("theorem3", rep.agmon_bound, 0.0))
        if v4:
            checks.append(("theorem4", b4, 0.0))
        for name, b, extra in checks:
            if b < ua - (slack_num + extra):
                violations.append({"bound": name, "point": rep.point, "u_abs": ua, "value": b,
                                   "slack": slack_num, "report": rep.row()})
    if check and violations:
        v = violations[0]
        raise SoundnessError(
            f"{len(violations)} bound violation(s) in scenario {state.scenario.name!r}; first: "
            f"{v['bound']} at {v['point']} gives {v['value']:.6g} < |u| = {v['u_abs']:.6g} "
            f"(slack {v['slack']:.3g})", violations)
    return reports


def soundness_violations(reports: Sequence[BoundReport]) -> list[dict]:
    """Re-evaluate the soundness rule on finished reports."""
    out = []
    for r in reports:
        pairs = [("theorem1", r.thm1_certified)]
        if r.delta_rho_flag:
            pairs.append(("theorem3", r.agmon_bound))
        if r.fk_valid:
            pairs.append(("theorem4", r.fk_bound))
        for name, b in pairs:
            if b < r.u_abs - r.slack:
                out.append({"bound": name, "point": r.point, "value": b, "u_abs": r.u_abs})
    return out
