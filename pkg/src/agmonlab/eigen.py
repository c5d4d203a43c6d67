"""Finite-difference Schroedinger operator -1/2 Lap + V with Dirichlet walls."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .fields import Grid, RegionMask, ScalarField


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class EigenPair:
    lam: float
    u: ScalarField
    residual: float
    iterations: int
    normalization: str = "sup-norm-one"


def _check_same_grid(a: ScalarField, b: ScalarField):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def _interior(grid: Grid) -> tuple[slice, ...]:
    return tuple(slice(1, -1) for _ in range(grid.dim))


def _apply_interior(vin: np.ndarray, vpot: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """(-1/2 Lap + V) on interior-shaped arrays, zero Dirichlet padding."""
    pad = np.pad(vin, 1)
    out = vpot * vin
    core = tuple(slice(1, -1) for _ in range(vin.ndim))
    for ax, hx in enumerate(h):
        lo = list(core)
        hi = list(core)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out = out - 0.5 * (pad[tuple(lo)] - 2.0 * vin + pad[tuple(hi)]) / (hx * hx)
    return out


def apply_hamiltonian(V: ScalarField, v: ScalarField) -> ScalarField:
    """(-1/2 Lap_h + V) v on interior nodes; box nodes carry the Dirichlet zero."""
    _check_same_grid(V, v)
    g = V.grid
    inner = _interior(g)
    out = np.zeros(g.shape)
    out[inner] = _apply_interior(v.values[inner], V.values[inner], g.h)
    return ScalarField(g, out)


def hamiltonian_matrix(V: ScalarField, shift: float = 0.0,
                       unknowns: np.ndarray | None = None) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse H - shift restricted to ``unknowns`` (default: interior nodes).

    Returns the matrix and the flat node indices of the unknowns. Couplings to
    nodes outside the unknown set are dropped (they act as Dirichlet data).
    """
    g = V.grid
    if unknowns is None:
        unknowns = ~g.boundary_mask()
    unknowns = unknowns & ~g.boundary_mask()
    idx = np.flatnonzero(unknowns)
    pos = -np.ones(g.size, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    diag = V.values.ravel()[idx] - shift
    rows, cols, vals = [], [], []
    strides = np.cumprod((1,) + g.shape[::-1])[:-1][::-1]
    for ax, hx in enumerate(g.h):
        w = 0.5 / (hx * hx)
        diag = diag + 2.0 * w
        for sgn in (-1, 1):
            nb = idx + sgn * strides[ax]
            p = pos[nb]
            keep = p >= 0
            rows.append(np.flatnonzero(keep))
            cols.append(p[keep])
            vals.append(np.full(keep.sum(), -w))
    rows.append(np.arange(idx.size))
    cols.append(np.arange(idx.size))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(idx.size, idx.size))
    return A, idx


def rayleigh_quotient(V: ScalarField, v: ScalarField) -> float:
    _check_same_grid(V, v)
    inner = _interior(V.grid)
    x = v.values[inner]
    nrm = float(np.vdot(x, x))
    if nrm == 0.0:
        raise ValueError("rayleigh_quotient of the zero vector")
    hx = _apply_interior(x, V.values[inner], V.grid.h)
    return float(np.vdot(x, hx)) / nrm


def _cg_solve(A, b, x0, rtol, maxiter):
    d = A.diagonal()
    M = LinearOperator(A.shape, matvec=lambda r: r / d)
    x, info = cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    return x, info


def ground_state(V: ScalarField, tol: float = 1e-8, max_iter: int = 500,
                 cg_rtol: float = 1e-12) -> EigenPair:
    """Lowest eigenpair by inverse iteration (shift 0) with Jacobi-CG inner solves.

    The start vector is all ones on interior nodes, so the result is deterministic.
    ``tol`` bounds ||Hu - lam u||_2 / ||u||_2.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    g = V.grid
    A, idx = hamiltonian_matrix(V)
    x = np.ones(idx.size)
    x /= np.linalg.norm(x)
    lam, res = np.inf, np.inf
    y = x
    for it in range(1, max_iter + 1):
        y, _ = _cg_solve(A, x, y, cg_rtol, 20 * idx.size)
        x = y / np.linalg.norm(y)
        Ax = A @ x
        lam = float(x @ Ax)
        res = float(np.linalg.norm(Ax - lam * x))
        if res <= tol:
            break
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps", res)
    full = np.zeros(g.size)
    full[idx] = x
    k = int(np.argmax(np.abs(full)))
    full /= full[k]
    return EigenPair(lam, ScalarField(g, full.reshape(g.shape)), res, it)


def solve_exterior_bvp(V: ScalarField, lam: float, mask: RegionMask,
                       allowed_value: float = 1.0, rtol: float = 1e-13) -> ScalarField:
    """Solve (-1/2 Lap + V - lam) u = 0 on FORBIDDEN nodes.

    u = ``allowed_value`` on ALLOWED nodes and 0 on OUTER nodes. This is the
    fixed-energy problem whose decay the bounds describe; V > lam on the unknowns
    makes the system symmetric positive definite.
    """
    g = V.grid
    unknowns = mask.forbidden
    A, idx = hamiltonian_matrix(V, shift=lam, unknowns=unknowns)
    data = np.where(mask.allowed, allowed_value, 0.0)
    # Right-hand side: move known neighbours across.
    rhs_full = np.zeros(g.shape)
    for ax, hx in enumerate(g.h):
        w = 0.5 / (hx * hx)
        sl_a = [slice(None)] * g.dim
        sl_b = [slice(None)] * g.dim
        sl_a[ax], sl_b[ax] = slice(1, None), slice(None, -1)
        rhs_full[tuple(sl_a)] += w * data[tuple(sl_b)]
        rhs_full[tuple(sl_b)] += w * data[tuple(sl_a)]
    b = rhs_full.ravel()[idx]
    full = data.ravel().copy()
    if idx.size:
        x, info = _cg_solve(A, b, np.zeros(idx.size), rtol, 50 * idx.size)
        if info != 0:
            r = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
            raise ConvergenceError("exterior solve did not converge", float(r))
        full[idx] = x
    return ScalarField(g, full.reshape(g.shape))


def boundary_decay(u: ScalarField, mask: RegionMask) -> float:
    """max |u| on forbidden nodes next to the OUTER wall, relative to max |u|.

    This is the truncation certificate for scenarios whose box is an artificial
    cut of an unbounded region; 0 when no forbidden node touches the wall.
    """
    from .fields import _dilate

    rim = mask.forbidden & _dilate(mask.outer)
    if not rim.any():
        return 0.0
    return float(np.abs(u.values[rim]).max() / np.abs(u.values).max())
