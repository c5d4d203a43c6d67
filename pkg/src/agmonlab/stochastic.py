"""Brownian exits, harmonic measure (Monte Carlo and SOR) and the discount E[e^{-tau}].

Random numbers come from per-replica SplitMix64 counter streams keyed by
(seed, replica), with a 128-layer ziggurat for normals, so every estimate is
reproducible regardless of how replicas are scheduled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .agmon import BubbleClass, BubbleSet, forbidden_domain
from .fields import Grid, RegionMask, ScalarField

# Discrete-monitoring correction for a Gaussian walk: shifting the barrier by
# beta * step_std removes the O(sqrt(dt)) overshoot bias (Siegmund's constant).
BETA = 0.5826


class ExitClass(enum.IntEnum):
    HIT_E = 0
    HIT_ALPHA = 1
    HIT_OUTER = 2
    TIMEOUT = 3
    KILLED = 4  # internal: exponential clock rang before exit


@dataclass(frozen=True)
class ClockedExit:
    exit_class: ExitClass
    agmon_clock: float
    euclid_time: float
    exit_point: tuple[float, ...]


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    stderr: float
    n: int
    seed: int
    timeout_fraction: float
    timeout_ceiling: float = 0.0
    warning: bool = False
    counts: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n, "seed": self.seed,
                "timeout_fraction": self.timeout_fraction,
                "timeout_ceiling": self.timeout_ceiling, "warning": self.warning,
                "counts": dict(zip((c.name for c in ExitClass), self.counts))}


# ------------------------------------------------------------------- RNG

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_MASK7 = np.uint64(127)
_INV53 = 1.0 / 9007199254740992.0

ZIG_R = 3.442619855899
ZIG_V = 9.91256303526217e-3


def _ziggurat_tables():
    f = lambda x: math.exp(-0.5 * x * x)
    x = np.zeros(129)
    x[0] = ZIG_V / f(ZIG_R)
    x[1] = ZIG_R
    for i in range(2, 128):
        x[i] = math.sqrt(-2.0 * math.log(ZIG_V / x[i - 1] + f(x[i - 1])))
    x[128] = 0.0
    ratio = x[1:] / x[:-1]
    return x, ratio


ZIG_X, ZIG_RATIO = _ziggurat_tables()


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def stream_key(seed, replica):
    """Initial SplitMix64 state for one replica."""
    return _mix(_mix(np.uint64(seed) + _GOLDEN) ^ (np.uint64(replica) * _M2 + _GOLDEN))


@numba.njit(cache=True, inline="always")
def _next(state):
    state = state + _GOLDEN
    return state, _mix(state)


@numba.njit(cache=True, inline="always")
def _uniform(state):
    state, z = _next(state)
    return state, (np.int64(z >> _S11) + 0.5) * _INV53


@numba.njit(cache=True)
def _normal_slow(state, z):
    # rejection part of the ziggurat, entered with the first draw z
    while True:
        i = np.int64(z & _MASK7)
        u = 2.0 * (np.int64(z >> _S11) * _INV53) - 1.0
        if abs(u) < ZIG_RATIO[i]:
            return state, u * ZIG_X[i]
        if i == 0:
            while True:
                state, u1 = _uniform(state)
                state, u2 = _uniform(state)
                xt = math.log(u1) / ZIG_R
                yt = math.log(u2)
                if -2.0 * yt >= xt * xt:
                    break
            return state, (xt - ZIG_R) if u < 0 else (ZIG_R - xt)
        xx = u * ZIG_X[i]
        f0 = math.exp(-0.5 * (ZIG_X[i] * ZIG_X[i] - xx * xx))
        f1 = math.exp(-0.5 * (ZIG_X[i + 1] * ZIG_X[i + 1] - xx * xx))
        state, v = _uniform(state)
        if f1 + v * (f0 - f1) < 1.0:
            return state, xx
        state, z = _next(state)


@numba.njit(cache=True, inline="always")
def _normal(state):
    state, z = _next(state)
    i = np.int64(z & _MASK7)
    u = 2.0 * (np.int64(z >> _S11) * _INV53) - 1.0
    if abs(u) < ZIG_RATIO[i]:
        return state, u * ZIG_X[i]
    return _normal_slow(state, z)


@numba.njit(cache=True)
def normal_block(seed, replica, n):
    """n standard normals from one replica stream (for testing the generator)."""
    out = np.empty(n)
    s = stream_key(seed, replica)
    for k in range(n):
        s, out[k] = _normal(s)
    return out


@numba.njit(cache=True)
def uniform_block(seed, replica, n):
    out = np.empty(n)
    s = stream_key(seed, replica)
    for k in range(n):
        s, out[k] = _uniform(s)
    return out


# ----------------------------------------------------------- walk geometry

@dataclass(frozen=True)
class WalkDomain:
    """Arrays consumed by the walk kernel (1D grids carried as n x 1)."""

    grid: Grid
    code: np.ndarray      # -1 inside, else the ExitClass of the node
    edt: np.ndarray       # distance to nearest non-domain node
    near_code: np.ndarray  # exit class of that nearest node
    vl: np.ndarray        # max(V - lam, 0)
    isq: np.ndarray       # 1/sqrt(V - lam), floored at the domain minimum of V - lam


def _codes_from_bubble(dom: BubbleSet) -> np.ndarray:
    c = dom.classes
    code = np.full(c.shape, ExitClass.HIT_ALPHA, dtype=np.int8)
    code[c == BubbleClass.INSIDE] = -1
    code[c == BubbleClass.BOUNDARY_E] = ExitClass.HIT_E
    code[c == BubbleClass.BOUNDARY_OUTER] = ExitClass.HIT_OUTER
    return code


def walk_domain(dom: BubbleSet, V: ScalarField, lam: float, mask: RegionMask | None = None) -> WalkDomain:
    """Exit classes per node: ALLOWED -> HIT_E, box -> HIT_OUTER, rest -> HIT_ALPHA."""
    g = dom.grid
    code = _codes_from_bubble(dom)
    if mask is not None:
        code[(code != -1) & mask.allowed] = ExitClass.HIT_E
        code[(code != -1) & mask.outer] = ExitClass.HIT_OUTER
    code[g.boundary_mask() & (code == -1)] = ExitClass.HIT_OUTER
    inside = code == -1
    if not inside.any():
        raise ValueError("walk domain has no interior nodes")
    dist, idx = ndimage.distance_transform_edt(inside, sampling=g.h, return_indices=True)
    near = code[tuple(idx)]
    vl = np.maximum(V.values - lam, 0.0)
    floor = vl[inside].min()
    isq = 1.0 / np.sqrt(np.maximum(vl, floor)) if floor > 0 else np.zeros_like(vl)
    shape2 = (g.n[0], 1) if g.dim == 1 else g.shape
    return WalkDomain(g, code.reshape(shape2), dist.reshape(shape2),
                      near.reshape(shape2).astype(np.int8), vl.reshape(shape2),
                      isq.reshape(shape2))


@numba.njit(cache=True)
def _bilinear(a, fx, fy, nx, ny):
    i = int(fx)
    if i < 0:
        i = 0
    if i > nx - 2:
        i = nx - 2
    tx = fx - i
    if ny == 1:
        return (1 - tx) * a[i, 0] + tx * a[i + 1, 0]
    j = int(fy)
    if j < 0:
        j = 0
    if j > ny - 2:
        j = ny - 2
    ty = fy - j
    return ((1 - tx) * (1 - ty) * a[i, j] + tx * (1 - ty) * a[i + 1, j]
            + (1 - tx) * ty * a[i, j + 1] + tx * ty * a[i + 1, j + 1])


LANES = 8


@numba.njit(cache=True)
def _batch(code, edt, near_code, vl, isq, ox, oy, hx, hy, x0, y0, dt, t_max, tc, kill,
           seed, first, n, beta):
    """Replicas first..first+n-1, returning (class, tau, sigma, x, y) per replica.

    Plain walk: step variance dt, tau += (V - lam)(x_k) dt.
    Time-changed walk: step variance dt / (V - lam)(x_k), tau += dt.
    Several replicas advance in lockstep to overlap their dependency chains; each
    owns its stream, so results do not depend on the interleaving.
    """
    nx, ny = code.shape
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    sq0 = math.sqrt(dt)
    cls = np.empty(n, dtype=np.int8)
    tau_out = np.empty(n)
    sig_out = np.empty(n)
    px = np.empty(n)
    py = np.empty(n)
    L = min(LANES, n)
    rep = np.empty(L, dtype=np.int64)
    st = np.empty(L, dtype=np.uint64)
    X = np.empty(L)
    Y = np.empty(L)
    T = np.empty(L)
    SG = np.empty(L)
    TH = np.empty(L)
    nxt = 0
    active = 0
    for l in range(L):
        s = stream_key(seed, first + nxt)
        th = np.inf
        if kill:
            s, u = _uniform(s)
            th = -math.log(u)
        rep[l] = nxt
        st[l] = s
        X[l] = x0
        Y[l] = y0
        T[l] = 0.0
        SG[l] = 0.0
        TH[l] = th
        nxt += 1
        active += 1
    while active > 0:
        for l in range(L):
            r_id = rep[l]
            if r_id < 0:
                continue
            x = X[l]
            y = Y[l]
            s = st[l]
            tau = T[l]
            sigma = SG[l]
            fx = (x - ox) * ihx
            fy = (y - oy) * ihy if ny > 1 else 0.0
            if tc:
                r = _bilinear(isq, fx, fy, nx, ny)
                sq = sq0 * r
                sigma += dt * r * r
                tau += dt
            else:
                sq = sq0
                sigma += dt
                tau += _bilinear(vl, fx, fy, nx, ny) * dt
            s, g1 = _normal(s)
            x += sq * g1
            if ny > 1:
                s, g2 = _normal(s)
                y += sq * g2
            c = -1
            if tau >= TH[l]:
                c = 4
            else:
                fx = (x - ox) * ihx
                i = int(fx + 0.5)
                i = 0 if i < 0 else (nx - 1 if i > nx - 1 else i)
                j = 0
                fy = 0.0
                if ny > 1:
                    fy = (y - oy) * ihy
                    j = int(fy + 0.5)
                    j = 0 if j < 0 else (ny - 1 if j > ny - 1 else j)
                c = code[i, j]
                if c < 0:
                    if fx < 0.0 or fx > nx - 1 or (ny > 1 and (fy < 0.0 or fy > ny - 1)):
                        c = 2
                    elif _bilinear(edt, fx, fy, nx, ny) <= beta * sq:
                        c = near_code[i, j]
                    elif sigma > t_max:
                        c = 3
            if c < 0:
                X[l] = x
                Y[l] = y
                st[l] = s
                T[l] = tau
                SG[l] = sigma
                continue
            cls[r_id] = c
            tau_out[r_id] = tau
            sig_out[r_id] = sigma
            px[r_id] = x
            py[r_id] = y
            if nxt < n:
                s = stream_key(seed, first + nxt)
                th = np.inf
                if kill:
                    s, u = _uniform(s)
                    th = -math.log(u)
                rep[l] = nxt
                st[l] = s
                X[l] = x0
                Y[l] = y0
                T[l] = 0.0
                SG[l] = 0.0
                TH[l] = th
                nxt += 1
            else:
                rep[l] = -1
                active -= 1
    return cls, tau_out, sig_out, px, py


def _start(wd: WalkDomain, start) -> tuple[float, float]:
    g = wd.grid
    p = np.atleast_1d(np.asarray(start, dtype=float))
    if p.shape != (g.dim,):
        raise ValueError(f"start must have {g.dim} coordinates")
    if not g.contains(p):
        raise ValueError(f"start {tuple(p)} outside grid extent")
    return float(p[0]), float(p[1]) if g.dim == 2 else 0.0


def _start_class(wd: WalkDomain, start) -> int:
    g = wd.grid
    idx = g.nearest_node(start)
    if g.dim == 1:
        idx = (idx[0], 0)
    return int(wd.code[idx])


def _run(wd: WalkDomain, start, n, dt, t_max, seed, tc=False, kill=False, first=0):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n < 1:
        raise ValueError("need at least one replica")
    x0, y0 = _start(wd, start)
    g = wd.grid
    hy = g.h[1] if g.dim == 2 else 1.0
    oy = g.origin[1] if g.dim == 2 else 0.0
    return _batch(wd.code, wd.edt, wd.near_code, wd.vl, wd.isq, g.origin[0], oy, g.h[0], hy, x0, y0,
                  float(dt), float(t_max), bool(tc), bool(kill), np.uint64(seed), int(first),
                  int(n), BETA)


def simulate_exit(V: ScalarField, lam: float, domain: BubbleSet | RegionMask, start, dt: float,
                  t_max: float, rng_seed: int, replica: int = 0,
                  time_change: bool = False) -> ClockedExit:
    """One Euler-Maruyama walk with the Agmon clock tau = sum (V - lam) dt."""
    dom = forbidden_domain(domain) if isinstance(domain, RegionMask) else domain
    mask = domain if isinstance(domain, RegionMask) else None
    wd = walk_domain(dom, V, lam, mask)
    c0 = _start_class(wd, start)
    if c0 == ExitClass.HIT_E:
        return ClockedExit(ExitClass.HIT_E, 0.0, 0.0, tuple(np.atleast_1d(start).astype(float)))
    if c0 >= 0:
        raise ValueError(f"start {start!r} is outside the walk domain")
    x0, y0 = _start(wd, start)
    g = wd.grid
    hy = g.h[1] if g.dim == 2 else 1.0
    oy = g.origin[1] if g.dim == 2 else 0.0
    c, tau, sig, x, y = _batch(wd.code, wd.edt, wd.near_code, wd.vl, wd.isq, g.origin[0], oy,
                               g.h[0], hy, x0, y0, float(dt), float(t_max), bool(time_change),
                               False, np.uint64(rng_seed), int(replica), 1, BETA)
    c, tau, sig, x, y = int(c[0]), float(tau[0]), float(sig[0]), float(x[0]), float(y[0])
    pt = (x, y) if g.dim == 2 else (x,)
    return ClockedExit(ExitClass(int(c)), float(tau), float(sig), pt)


def _check_samples(n: int):
    if n < 100:
        raise ValueError("n_samples must be at least 100")


def expected_discount(V: ScalarField, lam: float, domain: BubbleSet | RegionMask, start,
                      n_samples: int, dt: float, t_max: float, rng_seed: int,
                      mode: str = "kill", time_change: bool = False) -> MeasureEstimate:
    """Monte Carlo E[e^{-tau}; exit through E].

    ``mode='kill'`` draws an Exp(1) threshold per replica and scores 1 when the
    walk reaches E before tau passes it (same mean as the weight, cheaper walks).
    ``mode='weight'`` scores e^{-tau} at HIT_E. TIMEOUT replicas score 0; the
    reported ceiling bounds what they could have contributed.
    """
    _check_samples(n_samples)
    if mode not in ("kill", "weight"):
        raise ValueError("mode must be 'kill' or 'weight'")
    dom = forbidden_domain(domain) if isinstance(domain, RegionMask) else domain
    mask = domain if isinstance(domain, RegionMask) else None
    wd = walk_domain(dom, V, lam, mask)
    c0 = _start_class(wd, start)
    if c0 == ExitClass.HIT_E:
        return MeasureEstimate(1.0, 0.0, n_samples, rng_seed, 0.0, counts=(n_samples, 0, 0, 0, 0))
    if c0 >= 0:
        raise ValueError(f"start {start!r} is outside the walk domain")
    cls, tau, _, _, _ = _run(wd, start, n_samples, dt, t_max, rng_seed, tc=time_change,
                       kill=(mode == "kill"))
    hit = cls == ExitClass.HIT_E
    timeout = cls == ExitClass.TIMEOUT
    if mode == "kill":
        score = hit.astype(float)
        ceiling = float(timeout.mean())
    else:
        score = np.where(hit, np.exp(-tau), 0.0)
        ceiling = float(np.exp(-tau[timeout]).mean() * timeout.mean()) if timeout.any() else 0.0
    return _estimate(score, rng_seed, cls, ceiling)


def _estimate(score, seed, cls, ceiling=0.0) -> MeasureEstimate:
    n = score.size
    value = float(math.fsum(score) / n)
    sd = float(np.std(score, ddof=1)) if n > 1 else 0.0
    tf = float(np.mean(cls == ExitClass.TIMEOUT))
    counts = tuple(int(np.sum(cls == k)) for k in ExitClass)
    return MeasureEstimate(value, sd / math.sqrt(n), n, int(seed), tf, ceiling, tf > 0.5, counts)


def harmonic_measure_mc(domain: BubbleSet, start, n_samples: int, dt: float, t_max: float,
                        rng_seed: int, V: ScalarField | None = None, lam: float = 0.0,
                        time_change: bool = False, mask: RegionMask | None = None) -> MeasureEstimate:
    """Fraction of walks leaving ``domain`` through the allowed set.

    With ``time_change`` the step is dt / (V - lam), the walk of the time-changed
    diffusion; it needs ``V``.
    """
    _check_samples(n_samples)
    if V is None:
        if time_change:
            raise ValueError("time_change needs the potential")
        V = ScalarField(domain.grid, np.ones(domain.grid.shape))
        lam = 0.0
    wd = walk_domain(domain, V, lam, mask)
    c0 = _start_class(wd, start)
    if c0 >= 0:
        if c0 == ExitClass.HIT_E:
            return MeasureEstimate(1.0, 0.0, n_samples, rng_seed, 0.0,
                                   counts=(n_samples, 0, 0, 0, 0))
        raise ValueError(f"start {start!r} is outside the walk domain")
    if time_change and np.any(wd.vl[wd.code == -1] <= 0):
        raise ValueError("time change needs V > lam on the domain")
    cls, _, _, _, _ = _run(wd, start, n_samples, dt, t_max, rng_seed, tc=time_change)
    return _estimate((cls == ExitClass.HIT_E).astype(float), rng_seed, cls)


# ------------------------------------------------------------------ SOR

@numba.njit(cache=True)
def _sor(u, inside, hx, hy, omega, tol, max_sweeps):
    nx, ny = u.shape
    wx = 1.0 / (hx * hx)
    wy = 1.0 / (hy * hy) if ny > 1 else 0.0
    den = 2.0 * wx + 2.0 * wy
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(nx):
            for j in range(ny):
                if not inside[i, j]:
                    continue
                acc = wx * (u[i - 1, j] + u[i + 1, j])
                if ny > 1:
                    acc += wy * (u[i, j - 1] + u[i, j + 1])
                gs = acc / den
                delta = omega * (gs - u[i, j])
                u[i, j] += delta
                if abs(delta) > change:
                    change = abs(delta)
        if change < tol:
            return sweep + 1, change
    return -1, change


@numba.njit(cache=True)
def _residual(u, inside, hx, hy):
    nx, ny = u.shape
    wx = 1.0 / (hx * hx)
    wy = 1.0 / (hy * hy) if ny > 1 else 0.0
    den = 2.0 * wx + 2.0 * wy
    r = 0.0
    for i in range(nx):
        for j in range(ny):
            if inside[i, j]:
                acc = wx * (u[i - 1, j] + u[i + 1, j])
                if ny > 1:
                    acc += wy * (u[i, j - 1] + u[i, j + 1])
                r = max(r, abs(acc / den - u[i, j]))
    return r


class PDEConvergenceError(RuntimeError):
    pass


def harmonic_measure_pde(domain: BubbleSet, tol: float = 1e-10, max_sweeps: int = 200000,
                         mask: RegionMask | None = None, warm: ScalarField | None = None) -> ScalarField:
    """Discrete harmonic function: 1 on ALLOWED exits, 0 on other exits, SOR inside.

    The value at an INSIDE node is the harmonic measure of the allowed set seen
    from that pole. ``tol`` bounds the scaled residual |mean of neighbours - u|.
    """
    g = domain.grid
    code = _codes_from_bubble(domain)
    if mask is not None:
        code[(code != -1) & mask.allowed] = ExitClass.HIT_E
    code[g.boundary_mask() & (code == -1)] = ExitClass.HIT_OUTER
    inside = code == -1
    shape2 = (g.n[0], 1) if g.dim == 1 else g.shape
    u = np.where(code == ExitClass.HIT_E, 1.0, 0.0)
    if warm is not None:
        u = np.where(inside, warm.values, u)
    u = np.ascontiguousarray(u.reshape(shape2))
    ins = np.ascontiguousarray(inside.reshape(shape2))
    hy = g.h[1] if g.dim == 2 else 1.0
    nmax = max(g.n)
    omega = 2.0 / (1.0 + math.sin(math.pi / nmax))
    sweeps, change = _sor(u, ins, g.h[0], hy, omega, tol, max_sweeps)
    if sweeps < 0:
        raise PDEConvergenceError(f"SOR did not converge in {max_sweeps} sweeps (last change {change:.2e})")
    res = _residual(u, ins, g.h[0], hy)
    if res > tol:
        sweeps, change = _sor(u, ins, g.h[0], hy, 1.0, tol * 1e-2, max_sweeps)
        res = _residual(u, ins, g.h[0], hy)
        if res > tol:
            raise PDEConvergenceError(f"SOR residual {res:.2e} above tol {tol:.2e}")
    return ScalarField(g, np.clip(u.reshape(g.shape), 0.0, 1.0))


@dataclass(frozen=True)
class TimeChangeReport:
    uniform: MeasureEstimate
    changed: MeasureEstimate
    z: float
    passed: bool


def time_change_equivalence(domain: BubbleSet, V: ScalarField, lam: float, start, n: int,
                            dt: float, t_max: float, rng_seed: int,
                            dt_changed: float | None = None,
                            mask: RegionMask | None = None) -> TimeChangeReport:
    """Harmonic measure from the plain walk and from the time-changed walk.

    ``dt_changed`` is the base step of the time-changed walk (its local step is
    dt_changed / (V - lam)); by default it is dt times the smallest V - lam on the
    domain, so no time-changed step exceeds the plain one.
    """
    wd = walk_domain(domain, V, lam, mask)
    if dt_changed is None:
        dt_changed = dt * float(wd.vl[wd.code == -1].min())
    a = harmonic_measure_mc(domain, start, n, dt, t_max, rng_seed, V, lam, False, mask)
    b = harmonic_measure_mc(domain, start, n, dt_changed, t_max, rng_seed + 1, V, lam, True, mask)
    se = math.hypot(a.stderr, b.stderr)
    z = abs(a.value - b.value) / se if se > 0 else (0.0 if a.value == b.value else math.inf)
    return TimeChangeReport(a, b, z, z <= 3.0)
