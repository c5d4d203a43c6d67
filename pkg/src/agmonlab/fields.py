"""Uniform grids, node fields, potentials and region masks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

DEFAULT_V_CAP = 1e8


@dataclass(frozen=True)
class Grid:
    """Uniform 1D/2D lattice; axis 0 is x, axis 1 is y (``indexing='ij'``)."""

    dim: int
    n: tuple[int, ...]
    h: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not (len(self.n) == len(self.h) == len(self.origin) == self.dim):
            raise ValueError("n, h, origin must have one entry per axis")
        if any(k < 3 for k in self.n):
            raise ValueError(f"need at least 3 nodes per axis, got {self.n}")
        if any(not (s > 0 and math.isfinite(s)) for s in self.h):
            raise ValueError(f"spacing must be positive and finite, got {self.h}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def extent(self) -> list[tuple[float, float]]:
        return [(o, o + (k - 1) * s) for o, k, s in zip(self.origin, self.n, self.h)]

    @property
    def hmin(self) -> float:
        return min(self.h)

    def axes(self) -> list[np.ndarray]:
        return [o + s * np.arange(k) for o, k, s in zip(self.origin, self.n, self.h)]

    def coords(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays of shape ``self.shape``."""
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``shape + (dim,)``."""
        return np.stack(self.coords(), axis=-1)

    def index_to_coord(self, idx: Sequence[int]) -> tuple[float, ...]:
        return tuple(o + i * s for o, i, s in zip(self.origin, idx, self.h))

    def coord_to_index(self, p: Sequence[float]) -> tuple[int, ...]:
        """Nearest node index (not clamped)."""
        p = _as_point(p, self.dim)
        return tuple(int(round((x - o) / s)) for x, o, s in zip(p, self.origin, self.h))

    def contains(self, p: Sequence[float], tol: float = 1e-12) -> bool:
        p = _as_point(p, self.dim)
        return all(lo - tol * s <= x <= hi + tol * s
                   for x, (lo, hi), s in zip(p, self.extent, self.h))

    def nearest_node(self, p: Sequence[float]) -> tuple[int, ...]:
        """Nearest node index, clamped into the grid."""
        idx = self.coord_to_index(p)
        return tuple(min(max(i, 0), k - 1) for i, k in zip(idx, self.n))

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0] = m[-1] = True
        if self.dim == 2:
            m[:, 0] = m[:, -1] = True
        return m

    def to_dict(self) -> dict:
        return {"extent": [list(e) for e in self.extent], "n": list(self.n)}


def _as_point(p, dim: int) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.shape != (dim,):
        raise ValueError(f"expected a point with {dim} coordinates, got {p!r}")
    return tuple(float(v) for v in arr)


def build_grid(extent, n) -> Grid:
    """Grid with ``n`` nodes per axis spanning ``extent = [[min, max], ...]``."""
    extent = np.asarray(extent, dtype=float)
    if extent.ndim == 1:
        extent = extent[None, :]
    if extent.ndim != 2 or extent.shape[1] != 2:
        raise ValueError(f"extent must be a list of [min, max] pairs, got {extent.tolist()}")
    dim = extent.shape[0]
    ns = (int(n),) * dim if np.isscalar(n) else tuple(int(k) for k in n)
    if len(ns) != dim:
        raise ValueError("one node count per axis")
    if not np.all(np.isfinite(extent)):
        raise ValueError("extent must be finite")
    if np.any(extent[:, 1] <= extent[:, 0]):
        raise ValueError("extent max must exceed min")
    if any(k < 3 for k in ns):
        raise ValueError(f"need at least 3 nodes per axis, got {ns}")
    h = tuple(float((hi - lo) / (k - 1)) for (lo, hi), k in zip(extent, ns))
    return Grid(dim, ns, h, tuple(float(lo) for lo in extent[:, 0]))


@dataclass(frozen=True)
class ScalarField:
    """Real values on the nodes of a grid.

    ``valid`` optionally marks nodes whose value is meaningful (e.g. interior
    nodes of a finite-difference Laplacian); invalid nodes hold 0.
    """

    grid: Grid
    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.valid is not None:
            v = np.array(self.valid, dtype=bool, copy=True)
            if v.shape != vals.shape:
                raise ValueError("valid mask shape mismatch")
            v.setflags(write=False)
            object.__setattr__(self, "valid", v)

    def at(self, idx) -> float:
        return float(self.values[tuple(idx)])

    def sample(self, p) -> float:
        return bilinear_sample(self, p)


# ---------------------------------------------------------------- potentials

def _disk(points, center, radius):
    d = points - np.asarray(center, dtype=float)
    return np.einsum("...i,...i->...", d, d) <= radius * radius + 1e-12


def _v_exact_1d(points, p):
    x = points[..., 0]
    return np.where(np.abs(x) <= 1e-12, 0.0, p.get("value", 0.5))


def _v_constant(points, p):
    return np.full(points.shape[:-1], float(p["value"]))


def _v_ramp(points, p):
    return p.get("offset", 0.0) + p.get("slope", 1.0) * points[..., 0]


def _v_strip(points, p):
    y = points[..., 1] if points.shape[-1] > 1 else 0.0
    v = p["epsilon"] + y * y
    return np.where(_disk(points, (0.0, 0.0), p.get("radius", 1.0)), 0.0, v)


def _v_four_squares(points, p, v_cap):
    # Closed squares, interface nodes take the smaller adjacent value.
    # Layout: V=0 on [1,2]x[1,2], V=10 on [0,1]x[0,1], V=m on the anti-diagonal.
    m = float(p["m"])
    low = float(p.get("low", 10.0))
    x, y = points[..., 0], points[..., 1]
    tol = 1e-12
    inside = (x >= -tol) & (x <= 2 + tol) & (y >= -tol) & (y <= 2 + tol)
    right_x, left_x = x >= 1 - tol, x <= 1 + tol
    top_y, bot_y = y >= 1 - tol, y <= 1 + tol
    v = np.full(x.shape, v_cap)
    cand = [
        (right_x & top_y, 0.0),
        (left_x & bot_y, low),
        (left_x & top_y, m),
        (right_x & bot_y, m),
    ]
    for sel, val in cand:
        v = np.where(inside & sel, np.minimum(v, val), v)
    return v


def _v_radial_shell(points, p):
    return np.where(_disk(points, (0.0, 0.0), p.get("radius", 1.0)), float(p["c"]), 0.0)


def tendril_allowed(points, p):
    x, y = points[..., 0], points[..., 1]
    blob = _disk(points, p.get("blob_center", (-1.0, 0.0)), p.get("blob_radius", 0.6))
    x0, x1 = p.get("spike_x", (-0.4, 1.0))
    w = p.get("spike_halfwidth", 0.06)
    spike = (x >= x0) & (x <= x1 + 1e-12) & (np.abs(y) <= w + 1e-12)
    return blob | spike


def _v_tendril(points, p):
    return np.where(tendril_allowed(points, p), 0.0, float(p.get("c", 8.0)))


def champagne_bubbles(p) -> list[tuple[float, float, float]]:
    """(cx, cy, r) of the small disks on the ring."""
    count = int(p["bubble_count"])
    total = float(p.get("radius_sum", 0.6))
    ring = float(p.get("ring_radius", 0.55))
    law = p.get("radius_law", "equal")
    if law == "equal":
        radii = np.full(count, total / count)
    elif law == "geometric":
        q = float(p.get("ratio", 0.8))
        w = q ** np.arange(count)
        radii = total * w / w.sum()
    else:
        raise ValueError(f"unknown radius_law {law!r}")
    ang = (np.arange(count) + 0.5) * 2 * np.pi / count
    return [(ring * math.cos(a), ring * math.sin(a), float(r)) for a, r in zip(ang, radii)]


def _v_champagne(points, p, v_cap):
    r2 = np.einsum("...i,...i->...", points, points)
    v = np.where(r2 <= p.get("inner_radius", 0.25) ** 2 + 1e-12, 0.0, float(p.get("c", 2.0)))
    v = np.where(r2 > p.get("outer_radius", 1.0) ** 2 + 1e-12, v_cap, v)
    for cx, cy, r in champagne_bubbles(p):
        v = np.where(_disk(points, (cx, cy), r), v_cap, v)
    return v


_FAMILIES: dict[str, Callable[..., np.ndarray]] = {
    "exact_1d": _v_exact_1d,
    "constant": _v_constant,
    "ramp": _v_ramp,
    "strip": _v_strip,
    "radial_shell": _v_radial_shell,
    "tendril": _v_tendril,
}
_CAPPED = {"four_squares": _v_four_squares, "champagne": _v_champagne}


@dataclass(frozen=True)
class PotentialSpec:
    """A named analytic potential (or a tabulated field) at energy ``lam``.

    ``v_cap`` stands in for V = infinity; sampled values never exceed it.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    lam: float = 0.0
    v_cap: float = DEFAULT_V_CAP

    def __post_init__(self):
        if self.kind not in _FAMILIES and self.kind not in _CAPPED and self.kind != "tabulated":
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not self.v_cap > 0:
            raise ValueError("v_cap must be positive")

    def evaluate(self, points) -> np.ndarray:
        """V at ``points`` (shape ``(..., dim)``), clamped to ``v_cap``."""
        pts = np.asarray(points, dtype=float)
        if self.kind == "tabulated":
            fld: ScalarField = self.params["field"]
            flat = pts.reshape(-1, pts.shape[-1])
            raw = np.array([bilinear_sample(fld, q) for q in flat]).reshape(pts.shape[:-1])
        elif self.kind in _CAPPED:
            raw = _CAPPED[self.kind](pts, self.params, self.v_cap)
        else:
            raw = _FAMILIES[self.kind](pts, self.params)
        raw = np.asarray(raw, dtype=float)
        bad = ~np.isfinite(raw)
        if np.any(bad):
            where = np.argwhere(bad)[0]
            raise ValueError(f"potential {self.kind!r} is not finite at node {tuple(where)}")
        if np.any(raw < 0):
            where = np.argwhere(raw < 0)[0]
            raise ValueError(f"potential {self.kind!r} is negative at node {tuple(where)}")
        return np.minimum(raw, self.v_cap)

    def to_dict(self) -> dict:
        if self.kind == "tabulated":
            raise ValueError("tabulated potentials are not serializable")
        return {"kind": self.kind, "params": dict(self.params), "lambda": self.lam,
                "v_cap": self.v_cap}


def sample_potential(pot: PotentialSpec, grid: Grid) -> ScalarField:
    try:
        vals = pot.evaluate(grid.points())
    except ValueError as exc:
        raise ValueError(f"{exc} on grid {grid.to_dict()}") from None
    return ScalarField(grid, vals)


# -------------------------------------------------------------- region masks

class Region(enum.IntEnum):
    ALLOWED = 0
    FORBIDDEN = 1
    OUTER = 2


@dataclass(frozen=True)
class RegionMask:
    grid: Grid
    classes: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        c = np.array(self.classes, dtype=np.int8, copy=True)
        if c.shape != self.grid.shape:
            raise ValueError("class array shape mismatch")
        c.setflags(write=False)
        object.__setattr__(self, "classes", c)

    @property
    def allowed(self) -> np.ndarray:
        return self.classes == Region.ALLOWED

    @property
    def forbidden(self) -> np.ndarray:
        return self.classes == Region.FORBIDDEN

    @property
    def outer(self) -> np.ndarray:
        return self.classes == Region.OUTER

    def boundary_of_allowed(self) -> np.ndarray:
        """ALLOWED nodes with a FORBIDDEN axis neighbour (the discrete dE)."""
        return self.allowed & _dilate(self.forbidden)


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for ax in range(mask.ndim):
        sl_a = [slice(None)] * mask.ndim
        sl_b = [slice(None)] * mask.ndim
        sl_a[ax], sl_b[ax] = slice(1, None), slice(None, -1)
        out[tuple(sl_a)] |= mask[tuple(sl_b)]
        out[tuple(sl_b)] |= mask[tuple(sl_a)]
    return out


def region_mask(V: ScalarField, lam: float, delta: float = 0.0) -> RegionMask:
    """ALLOWED where V <= lam + delta; other box-boundary nodes are OUTER."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if np.any(V.values < 0):
        raise ValueError("potential must be nonnegative")
    allowed = V.values <= lam + delta
    if not allowed.any():
        raise ValueError(f"empty allowed set: min V = {V.values.min():g} > lambda + delta = "
                         f"{lam + delta:g}")
    classes = np.full(V.grid.shape, Region.FORBIDDEN, dtype=np.int8)
    classes[V.grid.boundary_mask()] = Region.OUTER
    classes[allowed] = Region.ALLOWED
    return RegionMask(V.grid, classes, float(delta))


# ---------------------------------------------------------- finite differences

def laplacian_fd(f: ScalarField) -> ScalarField:
    """Centered second differences; box-boundary nodes are marked invalid."""
    g = f.grid
    v = f.values
    out = np.zeros(g.shape)
    inner = tuple(slice(1, -1) for _ in range(g.dim))
    for ax in range(g.dim):
        lo = list(inner)
        hi = list(inner)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out[inner] += (v[tuple(lo)] - 2 * v[inner] + v[tuple(hi)]) / g.h[ax] ** 2
    valid = ~g.boundary_mask()
    return ScalarField(g, out, valid)


def gradient_norm(f: ScalarField) -> np.ndarray:
    """|grad f| by np.gradient (one-sided at the box)."""
    parts = np.gradient(f.values, *f.grid.h) if f.grid.dim > 1 else [np.gradient(f.values, f.grid.h[0])]
    return np.sqrt(sum(p * p for p in parts))


def bilinear_sample(f: ScalarField, p) -> float:
    g = f.grid
    if not g.contains(p):
        raise ValueError(f"point {p!r} outside grid extent {g.extent}")
    q = _as_point(p, g.dim)
    base, frac = [], []
    for x, o, s, k in zip(q, g.origin, g.h, g.n):
        t = (x - o) / s
        i = min(max(int(math.floor(t)), 0), k - 2)
        base.append(i)
        frac.append(min(max(t - i, 0.0), 1.0))
    v = f.values
    if g.dim == 1:
        i, = base
        a, = frac
        return float((1 - a) * v[i] + a * v[i + 1])
    (i, j), (a, b) = base, frac
    return float((1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j]
                 + (1 - a) * b * v[i, j + 1] + a * b * v[i + 1, j + 1])
