"""Agmon distance (fast marching and a Dijkstra oracle), path costs and bubbles."""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .fields import Grid, PotentialSpec, RegionMask, ScalarField, laplacian_fd

FMM = "fast-marching"
DIJKSTRA = "dijkstra"


@dataclass(frozen=True)
class DistanceField:
    rho: ScalarField
    source: RegionMask
    coeff: ScalarField
    method: str
    lam: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def at(self, p) -> float:
        return self.rho.sample(p)


def agmon_coefficient(V: ScalarField, lam: float) -> ScalarField:
    """c(x) = sqrt(2 max(V - lam, 0))."""
    return ScalarField(V.grid, np.sqrt(2.0 * np.maximum(V.values - lam, 0.0)))


# ------------------------------------------------------------- fast marching

@numba.njit(cache=True)
def _godunov_pair(a, ha, b, hb, c):
    # smallest u with sum max(u - a_i, 0)^2 / h_i^2 = c^2 over the pair
    if b < a:
        a, b = b, a
        ha, hb = hb, ha
    if a == np.inf:
        return np.inf
    if b == np.inf or (b - a) >= c * ha:
        return a + c * ha
    d = b - a
    ia = 1.0 / (ha * ha)
    ib = 1.0 / (hb * hb)
    A = ia + ib
    half_b = d * ib
    disc = half_b * half_b - A * (d * d * ib - c * c)
    if disc < 0.0:
        disc = 0.0
    return a + (half_b + math.sqrt(disc)) / A


@numba.njit(cache=True)
def _val(u, i, j, nx, ny):
    if i < 0 or i >= nx or j < 0 or j >= ny:
        return np.inf
    return u[i, j]


@numba.njit(cache=True)
def _local_update(u, c, i, j, nx, ny, hx, hy, use_diag):
    ci = c[i, j]
    a = min(_val(u, i - 1, j, nx, ny), _val(u, i + 1, j, nx, ny))
    b = min(_val(u, i, j - 1, nx, ny), _val(u, i, j + 1, nx, ny))
    best = _godunov_pair(a, hx, b, hy, ci)
    if use_diag:
        hd = math.sqrt(hx * hx + hy * hy)
        a = min(_val(u, i - 1, j - 1, nx, ny), _val(u, i + 1, j + 1, nx, ny))
        b = min(_val(u, i - 1, j + 1, nx, ny), _val(u, i + 1, j - 1, nx, ny))
        best = min(best, _godunov_pair(a, hd, b, hd, ci))
    return best


@numba.njit(cache=True)
def _fmm_kernel(c, source, hx, hy, use_diag):
    nx, ny = c.shape
    u = np.full((nx, ny), np.inf)
    state = np.zeros((nx, ny), dtype=np.int8)  # 0 far, 1 trial, 2 accepted
    heap = [(0.0, 0)]
    heap.pop()
    pending = np.full((nx, ny), np.inf)
    for i in range(nx):
        for j in range(ny):
            if source[i, j]:
                u[i, j] = 0.0
                state[i, j] = 2
    for i in range(nx):
        for j in range(ny):
            if state[i, j] == 2:
                continue
            near = False
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    p, q = i + di, j + dj
                    if 0 <= p < nx and 0 <= q < ny and state[p, q] == 2:
                        near = True
            if near:
                nv = _local_update(u, c, i, j, nx, ny, hx, hy, use_diag)
                pending[i, j] = nv
                state[i, j] = 1
                heapq.heappush(heap, (nv, i * ny + j))
    while len(heap) > 0:
        val, k = heapq.heappop(heap)
        i, j = k // ny, k % ny
        if state[i, j] == 2 or val > pending[i, j]:
            continue
        u[i, j] = val
        state[i, j] = 2
        for di in range(-1, 2):
            for dj in range(-1, 2):
                if di == 0 and dj == 0:
                    continue
                p, q = i + di, j + dj
                if p < 0 or p >= nx or q < 0 or q >= ny or state[p, q] == 2:
                    continue
                nv = _local_update(u, c, p, q, nx, ny, hx, hy, use_diag)
                if nv < pending[p, q]:
                    pending[p, q] = nv
                    state[p, q] = 1
                    heapq.heappush(heap, (nv, p * ny + q))
    return u


@numba.njit(cache=True)
def _residual_kernel(u, c, source, hx, hy, use_diag):
    nx, ny = u.shape
    r = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            if source[i, j] or u[i, j] == np.inf:
                continue
            # upwind values only: neighbours not below u are inactive in the update
            v = _local_update(u, c, i, j, nx, ny, hx, hy, use_diag)
            r[i, j] = abs(u[i, j] - v) / max(1.0, u[i, j])
    return r


def _as2d(grid: Grid, arr: np.ndarray) -> np.ndarray:
    return arr.reshape(grid.n[0], 1) if grid.dim == 1 else arr


def _spacing(grid: Grid) -> tuple[float, float, bool]:
    if grid.dim == 1:
        return grid.h[0], 1.0, False
    hx, hy = grid.h
    return hx, hy, abs(hx - hy) <= 1e-12 * max(hx, hy)


def _check_source(V: ScalarField, mask: RegionMask):
    if mask.grid != V.grid:
        raise ValueError("mask and potential live on different grids")
    if not mask.allowed.any():
        raise ValueError("empty source: no ALLOWED nodes")


def fmm_distance(V: ScalarField, lam: float, mask: RegionMask) -> DistanceField:
    """First-order multistencil fast marching for |grad rho| = c, rho = 0 on ALLOWED.

    In 2D with square cells both the axis and the 45-degree rotated stencils are
    evaluated and the smaller update kept.
    """
    _check_source(V, mask)
    g = V.grid
    coeff = agmon_coefficient(V, lam)
    hx, hy, diag = _spacing(g)
    u = _fmm_kernel(_as2d(g, coeff.values).copy(), _as2d(g, mask.allowed).copy(), hx, hy, diag)
    u = u.reshape(g.shape)
    if not np.all(np.isfinite(u)):
        raise ValueError("fast marching left unreachable nodes")
    return DistanceField(ScalarField(g, u), mask, coeff, FMM, float(lam))


def eikonal_residual(dist: DistanceField) -> ScalarField:
    """Per-node |rho - upwind update(rho)| / max(1, rho); zero on the source."""
    g = dist.grid
    hx, hy, diag = _spacing(g)
    r = _residual_kernel(_as2d(g, dist.rho.values).copy(), _as2d(g, dist.coeff.values).copy(),
                         _as2d(g, dist.source.allowed).copy(), hx, hy, diag)
    return ScalarField(g, r.reshape(g.shape))


# ------------------------------------------------------------------ dijkstra

def _neighbour_offsets(dim: int):
    if dim == 1:
        return [(-1,), (1,)]
    return [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]


def dijkstra_distance(V: ScalarField, lam: float, mask: RegionMask) -> DistanceField:
    """Shortest paths on the 8-neighbour (2 in 1D) lattice graph.

    An edge into node y costs c(y) times its Euclidean length, so the first step
    off the allowed set is charged like the one-sided fast-marching update.
    """
    _check_source(V, mask)
    g = V.grid
    coeff = agmon_coefficient(V, lam)
    n = g.size
    ids = np.arange(n).reshape(g.shape)
    cflat = coeff.values.ravel()
    rows, cols, w = [], [], []
    for off in _neighbour_offsets(g.dim):
        src = [slice(max(0, -o), k - max(0, o)) for o, k in zip(off, g.n)]
        dst = [slice(max(0, o), k - max(0, -o)) for o, k in zip(off, g.n)]
        a = ids[tuple(src)].ravel()
        b = ids[tuple(dst)].ravel()
        length = math.sqrt(sum((o * s) ** 2 for o, s in zip(off, g.h)))
        rows.append(a)
        cols.append(b)
        w.append(cflat[b] * length)
    G = coo_matrix((np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(n, n)).tocsr()
    sources = np.flatnonzero(mask.allowed.ravel())
    d = dijkstra(G, directed=True, indices=sources, min_only=True)
    d = np.asarray(d, dtype=float).reshape(g.shape)
    d[mask.allowed] = 0.0
    if not np.all(np.isfinite(d)):
        raise ValueError("dijkstra left unreachable nodes")
    return DistanceField(ScalarField(g, d), mask, coeff, DIJKSTRA, float(lam))


def relative_gap(a: DistanceField, b: DistanceField) -> np.ndarray:
    """|a - b| / max(a, h) per node."""
    h = a.grid.hmin
    return np.abs(a.rho.values - b.rho.values) / np.maximum(a.rho.values, h)


# ------------------------------------------------------------------ paths

@dataclass(frozen=True)
class Polyline:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 2:
            raise ValueError("a polyline needs at least 2 points")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg == 0):
            raise ValueError("consecutive polyline points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def path_cost(pot: PotentialSpec, lam: float, gamma: Polyline, n_quad: int = 64,
              grid: Grid | None = None) -> float:
    """Composite-midpoint quadrature of the Agmon line element along ``gamma``."""
    if n_quad < 2:
        raise ValueError("n_quad must be at least 2")
    pts = gamma.points
    if grid is not None:
        for p in pts:
            if not grid.contains(p):
                raise ValueError(f"polyline point {tuple(p)} outside grid extent {grid.extent}")
    t = (np.arange(n_quad) + 0.5) / n_quad
    total = 0.0
    for p0, p1 in zip(pts[:-1], pts[1:]):
        mids = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        v = pot.evaluate(mids)
        c = np.sqrt(2.0 * np.maximum(v - lam, 0.0))
        total += float(c.mean()) * float(np.linalg.norm(p1 - p0))
    return total


# ----------------------------------------------------------------- bubbles

class BubbleClass(enum.IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    BOUNDARY_E = 2
    BOUNDARY_ALPHA = 3
    BOUNDARY_OUTER = 4


@dataclass(frozen=True)
class BubbleSet:
    """Sublevel set {forbidden, rho <= alpha} and its discrete boundary layers.

    Box-boundary nodes touching the bubble are BOUNDARY_OUTER.
    """

    grid: Grid
    classes: np.ndarray
    alpha: float

    def __post_init__(self):
        c = np.array(self.classes, dtype=np.int8, copy=True)
        c.setflags(write=False)
        object.__setattr__(self, "classes", c)

    @property
    def inside(self) -> np.ndarray:
        return self.classes == BubbleClass.INSIDE

    def contains(self, p) -> bool:
        """Whether the nearest node to ``p`` is INSIDE."""
        if not self.grid.contains(p):
            return False
        return bool(self.inside[self.grid.nearest_node(p)])

    def count(self, cls: BubbleClass) -> int:
        return int(np.sum(self.classes == cls))


def _touching(mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    for ax in range(mask.ndim):
        a = [slice(None)] * mask.ndim
        b = [slice(None)] * mask.ndim
        a[ax], b[ax] = slice(1, None), slice(None, -1)
        out[tuple(a)] |= mask[tuple(b)]
        out[tuple(b)] |= mask[tuple(a)]
    return out


def bubble(dist: DistanceField, alpha: float) -> BubbleSet:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    src = dist.source
    rho = dist.rho.values
    inside = src.forbidden & (rho <= alpha)
    near = _touching(inside)
    cls = np.full(rho.shape, BubbleClass.OUTSIDE, dtype=np.int8)
    cls[inside] = BubbleClass.INSIDE
    cls[near & src.allowed] = BubbleClass.BOUNDARY_E
    cls[near & src.forbidden & (rho > alpha)] = BubbleClass.BOUNDARY_ALPHA
    cls[near & src.outer] = BubbleClass.BOUNDARY_OUTER
    return BubbleSet(dist.grid, cls, float(alpha))


def forbidden_domain(mask: RegionMask) -> BubbleSet:
    """The whole forbidden region as a domain (alpha = inf)."""
    inside = mask.forbidden
    near = _touching(inside)
    cls = np.full(mask.grid.shape, BubbleClass.OUTSIDE, dtype=np.int8)
    cls[inside] = BubbleClass.INSIDE
    cls[near & mask.allowed] = BubbleClass.BOUNDARY_E
    cls[near & mask.outer] = BubbleClass.BOUNDARY_OUTER
    return BubbleSet(mask.grid, cls, math.inf)


# ---------------------------------------------------------- distance laplacian

@dataclass(frozen=True)
class DistanceLaplacian:
    lap: ScalarField
    flag: np.ndarray
    cut_locus: np.ndarray
    tol: float


def cut_locus(dist: DistanceField) -> np.ndarray:
    """Forbidden nodes whose two lowest neighbours point more than 45 degrees apart."""
    g = dist.grid
    rho = dist.rho.values
    forb = dist.source.forbidden
    out = np.zeros(g.shape, dtype=bool)
    if g.dim == 1:
        left = np.full(g.shape, np.inf)
        right = np.full(g.shape, np.inf)
        left[1:] = rho[:-1]
        right[:-1] = rho[1:]
        out = forb & (left < rho) & (right < rho)
        return out
    offs = [o for o in _neighbour_offsets(2)]
    pad = np.pad(rho, 1, constant_values=np.inf)
    nx, ny = g.shape
    stack = np.stack([pad[1 + di:1 + di + nx, 1 + dj:1 + dj + ny] for di, dj in offs])
    # slope per unit length toward each neighbour
    lens = np.array([math.hypot(di * g.h[0], dj * g.h[1]) for di, dj in offs])
    slope = (stack - rho[None]) / lens[:, None, None]
    order = np.argsort(slope, axis=0, kind="stable")
    ang = np.array([math.atan2(dj, di) for di, dj in offs])
    a1 = ang[order[0]]
    a2 = ang[order[1]]
    diff = np.abs((a1 - a2 + np.pi) % (2 * np.pi) - np.pi)
    s2 = np.take_along_axis(slope, order[1:2], axis=0)[0]
    out = forb & (diff > np.pi / 4 + 1e-9) & (s2 < 0)
    return out


def distance_laplacian(dist: DistanceField, tol: float | None = None) -> DistanceLaplacian:
    """Lap rho with a sign flag Lap rho >= -tol (default 10 h) off the cut locus."""
    g = dist.grid
    tol = 10.0 * g.hmin if tol is None else float(tol)
    lap = laplacian_fd(dist.rho)
    cut = cut_locus(dist)
    flag = lap.valid & (lap.values >= -tol) & ~cut
    return DistanceLaplacian(lap, flag, cut, tol)
