"""Stray-field energy of branch-constant magnetizations on shrinking multistructures.

The potential U solves  min 1/2 int |DU - M|^2  on a truncated box with U = 0
on its faces.  Nodes carry U, cells carry M.  The discrete functional is a sum
over grid edges,

    j(U) = 1/2 sum_e w_e (dU_e / l_e - M_e)^2,

where l_e is the edge length, w_e the edge volume (length times dual face
area) and M_e the dual-face average of the edge-parallel component of M.  Its
normal equations are the 7-point Laplacian on a rectilinear grid.  Grids are
tensor products of graded 1D axes so that a film of thickness h^2 and a wire of
width h can be resolved in the same box.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import BudgetExceeded, InvalidArgument, SolverFailure
from .mesh2d import CrossSection

WIRE_FILM, WIRE_WIRE = "wire_film", "wire_wire"


def graded_axis(L, features, growth=1.3, samples=4000):
    """Nodes on [-L, L] with spacing about ``s + (growth - 1) * dist`` from each feature.

    ``features`` is a list of ``(a, b, s)``: on [a, b] the spacing is at most s.
    Every feature endpoint is a node.
    """
    if not growth > 1:
        raise InvalidArgument("growth ratio must exceed 1")
    feats = [(float(a), float(b), float(s)) for a, b, s in features]
    for a, b, s in feats:
        if not (-L < a <= b < L and s > 0):
            raise InvalidArgument(f"feature [{a}, {b}] with spacing {s} does not fit in [-{L}, {L}]")

    def spacing(x):
        d = np.full_like(x, np.inf)
        for a, b, s in feats:
            dist = np.maximum(np.maximum(a - x, x - b), 0.0)
            d = np.minimum(d, s + (growth - 1.0) * dist)
        return d

    breaks = np.unique(np.concatenate([[-L, L], [a for a, _, _ in feats], [b for _, b, _ in feats]]))
    nodes = [np.array([-L])]
    for a, b in zip(breaks[:-1], breaks[1:]):
        x = np.linspace(a, b, samples)
        inv = 1.0 / spacing(x)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(x))])
        n = max(1, math.ceil(cum[-1] - 1e-9))
        nodes.append(np.interp(np.linspace(0.0, cum[-1], n + 1)[1:], cum, x))
    out = np.concatenate(nodes)
    out[-1] = L
    return out


@dataclass(eq=False)
class Grid3D:
    """Rectilinear grid given by its three node-coordinate axes."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @property
    def axes(self):
        return (self.x, self.y, self.z)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def n_cells(self):
        return int(np.prod([len(a) - 1 for a in self.axes]))

    def cell_centers(self):
        c = [0.5 * (a[1:] + a[:-1]) for a in self.axes]
        return np.meshgrid(*c, indexing="ij")

    def cell_volumes(self):
        d = [np.diff(a) for a in self.axes]
        return d[0][:, None, None] * d[1][None, :, None] * d[2][None, None, :]


def _dual(a):
    d = np.diff(a)
    return 0.5 * (np.r_[0.0, d] + np.r_[d, 0.0])


def _diff_op(n):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))


class PoissonOperator:
    """Edge gradient G, edge weights W and the pinned matrix G^T W G of a grid."""

    def __init__(self, grid):
        self.grid = grid
        nx, ny, nz = grid.shape
        I = [sp.identity(n, format="csr") for n in grid.shape]
        d = [np.diff(a) for a in grid.axes]
        h = [_dual(a) for a in grid.axes]
        self.G = []
        self.w = []
        for k in range(3):
            ops = [I[0], I[1], I[2]]
            ops[k] = sp.diags(1.0 / d[k]) @ _diff_op(grid.shape[k])
            self.G.append(sp.kron(sp.kron(ops[0], ops[1]), ops[2]).tocsr())
            f = [h[0], h[1], h[2]]
            f[k] = d[k]
            self.w.append(np.einsum("i,j,k->ijk", *f).ravel())
        interior = np.zeros(grid.shape, dtype=bool)
        interior[1:-1, 1:-1, 1:-1] = True
        self.free = np.flatnonzero(interior.ravel())
        A = sum(G.T @ sp.diags(w) @ G for G, w in zip(self.G, self.w))
        self.A = A.tocsr()[self.free][:, self.free].tocsr()
        self._amg = None

    def edge_magnetization(self, M):
        """Dual-face averages of the edge-parallel components of a cell field M."""
        g = self.grid
        d = [np.diff(a) for a in g.axes]
        out = []
        for k in range(3):
            c = np.asarray(M[..., k], dtype=float)
            others = [j for j in range(3) if j != k]
            for j in others:
                half = 0.5 * d[j]
                shape = [1, 1, 1]
                shape[j] = -1
                weighted = c * half.reshape(shape)
                pad = [(0, 0)] * 3
                pad[j] = (1, 0)
                lo = np.pad(weighted, pad)
                pad[j] = (0, 1)
                hi = np.pad(weighted, pad)
                hd = _dual(g.axes[j])
                with np.errstate(invalid="ignore", divide="ignore"):
                    c = (lo + hi) / hd.reshape(shape)
                c = np.nan_to_num(c)
            out.append(c.ravel())
        return out

    def rhs(self, Me):
        return sum(G.T @ (w * m) for G, w, m in zip(self.G, self.w, Me))[self.free]

    def solve(self, M, tol=1e-8, maxiter=2000):
        Me = self.edge_magnetization(M)
        b = self.rhs(Me)
        U = np.zeros(int(np.prod(self.grid.shape)))
        bn = np.linalg.norm(b)
        if bn == 0.0:
            return U.reshape(self.grid.shape), Me, 0.0
        if self._amg is None:
            self._amg = pyamg.smoothed_aggregation_solver(self.A, symmetry="symmetric")
        x, info = cg(self.A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=self._amg.aspreconditioner())
        res = float(np.linalg.norm(b - self.A @ x) / bn)
        if info != 0 or res > tol * 1.0001:
            raise SolverFailure(f"potential solve stopped at relative residual {res:.3e}", residual=res)
        U[self.free] = x
        return U.reshape(self.grid.shape), Me, res

    def energies(self, U, Me):
        """(1/2 sum w DU.M, 1/2 sum w |DU|^2)."""
        u = U.ravel()
        grads = [G @ u for G in self.G]
        e_dm = 0.5 * sum(float(np.sum(w * g * m)) for w, g, m in zip(self.w, grads, Me))
        e_dd = 0.5 * sum(float(np.sum(w * g * g)) for w, g in zip(self.w, grads))
        return e_dm, e_dd


def _unit_square():
    return CrossSection.rectangle((0.0, 0.0), (1.0, 1.0))


@dataclass(eq=False)
class Multistructure3D:
    """Wire on film, or two joined wires, at thickness parameter h on a graded grid."""

    kind: str
    h: float
    theta: CrossSection = None
    L: float = 4.0
    delta: float = None
    film_cells: int = 4
    growth: float = 1.3
    grid: Grid3D = field(init=False)

    def __post_init__(self):
        if self.kind not in (WIRE_FILM, WIRE_WIRE):
            raise InvalidArgument(f"kind must be {WIRE_FILM!r} or {WIRE_WIRE!r}")
        if not 0 < self.h < 1:
            raise InvalidArgument("h must lie in (0, 1)")
        if self.delta is None:
            self.delta = self.h / 4
        if self.delta > self.h / 4 * (1 + 1e-12):
            raise InvalidArgument("wire cross-section needs at least 4 cells per side (delta <= h/4)")
        if self.film_cells < 2:
            raise InvalidArgument("film thickness needs at least 2 cells")
        h, d = self.h, self.delta
        along = 2 * d
        if self.kind == WIRE_FILM:
            self.theta = self.theta or _unit_square()
            (x0, y0), (x1, y1) = self.theta.vertices.min(0), self.theta.vertices.max(0)
            extent = max(abs(x0), abs(x1), abs(y0), abs(y1), 1.0)
            s_film = min(2 * d, 0.1)
            fx = [(h * x0, h * x1, d), (x0, x1, s_film)]
            fy = [(h * y0, h * y1, d), (y0, y1, s_film)]
            fz = [(-h * h, 0.0, h * h / self.film_cells), (0.0, 1.0, along)]
        else:
            extent = 1.0 + h
            fx = [(-h, 0.0, d), (0.0, 1.0, along)]
            fy = [(-h, 0.0, d)]
            fz = [(-h, 0.0, d), (0.0, 1.0, along)]
        if self.L - extent < self.L / 2:
            raise InvalidArgument(f"box half-width {self.L} leaves less than L/2 margin around the structure")
        self.grid = Grid3D(graded_axis(self.L, fx, self.growth),
                           graded_axis(self.L, fy, self.growth),
                           graded_axis(self.L, fz, self.growth))

    def regions(self):
        """Boolean cell masks (branch a, branch b)."""
        X, Y, Z = self.grid.cell_centers()
        h = self.h
        if self.kind == WIRE_FILM:
            flat = np.column_stack([X.ravel(), Y.ravel()])
            in_wire_xy = self.theta.scaled(h).contains(flat).reshape(X.shape)
            in_film_xy = self.theta.contains(flat).reshape(X.shape)
            a = in_wire_xy & (Z > 0) & (Z < 1)
            b = in_film_xy & (Z > -h * h) & (Z < 0)
        else:
            a = (X > -h) & (X < 0) & (Y > -h) & (Y < 0) & (Z > 0) & (Z < 1)
            b = (X > -h) & (X < 1) & (Y > -h) & (Y < 0) & (Z > -h) & (Z < 0)
        return a, b

    def magnetization(self, m_a, m_b):
        a, b = self.regions()
        M = np.zeros(a.shape + (3,))
        M[a] = np.asarray(m_a, dtype=float)
        M[b] = np.asarray(m_b, dtype=float)
        return M

    def limit(self, m_a, m_b, coeffs):
        """Limit of E_mag / h^2 for branch-constant fields."""
        m_a, m_b = np.asarray(m_a, dtype=float), np.asarray(m_b, dtype=float)
        if self.kind == WIRE_FILM:
            return 0.5 * (coeffs.quadratic_form(m_a[0], m_a[1]) + self.theta.area * m_b[2] ** 2)
        return 0.5 * (coeffs.quadratic_form(m_a[0], m_a[1]) + coeffs.quadratic_form(m_b[1], m_b[2]))


def solve_potential(structure, M, tol=1e-8, operator=None):
    grid = structure.grid if hasattr(structure, "grid") else structure
    op = operator or PoissonOperator(grid)
    U, _, _ = op.solve(M, tol)
    return U


def magnetostatic_energy(structure, M, U=None, tol=1e-8, operator=None):
    """Returns (1/2 int DU . M, 1/2 int |DU|^2)."""
    grid = structure.grid if hasattr(structure, "grid") else structure
    op = operator or PoissonOperator(grid)
    Me = op.edge_magnetization(M)
    if U is None:
        U, Me, _ = op.solve(M, tol)
    return op.energies(U, Me)


def block_structure(lower, upper, delta, L=4.0, growth=1.3):
    """Grid resolving an axis-aligned box, with the box's cell mask."""
    axes = [graded_axis(L, [(lo, hi, delta)], growth) for lo, hi in zip(lower, upper)]
    grid = Grid3D(*axes)
    X, Y, Z = grid.cell_centers()
    mask = ((X > lower[0]) & (X < upper[0]) & (Y > lower[1]) & (Y < upper[1])
            & (Z > lower[2]) & (Z < upper[2]))
    return grid, mask


def convergence_study(kind, m_a, m_b, h_list, coeffs, theta=None, L=4.0, delta_ratio=0.25,
                      film_cells=4, tol=1e-8, max_cells=8_000_000):
    """E_mag / h^2 against its limit for each h, plus a monotonicity verdict."""
    hs = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise InvalidArgument("h_list must be strictly decreasing")
    if delta_ratio > 0.25:
        raise InvalidArgument("delta_ratio must be at most 1/4")
    structures = [Multistructure3D(kind, h, theta, L, delta_ratio * h, film_cells) for h in hs]
    over = [s.h for s in structures if s.grid.n_cells > max_cells]
    if over:
        raise BudgetExceeded(f"grid for h={over} exceeds {max_cells} cells", offending=over)
    rows = []
    for s in structures:
        M = s.magnetization(m_a, m_b)
        op = PoissonOperator(s.grid)
        U, Me, res = op.solve(M, tol)
        e_dm, e_dd = op.energies(U, Me)
        lim = s.limit(m_a, m_b, coeffs)
        val = e_dd / s.h**2
        rel = abs(val - lim) / abs(lim) if lim != 0 else abs(val)
        rows.append({"h": s.h, "E_over_h2": val, "E_dm_over_h2": e_dm / s.h**2, "limit": lim,
                     "rel_error": rel, "n_cells": s.grid.n_cells, "residual": res})
    errs = [r["rel_error"] for r in rows]
    return {"kind": kind, "rows": rows,
            "monotone": all(b < a for a, b in zip(errs, errs[1:]))}


def write_study(study, csv_path=None, json_path=None):
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "E_over_h2", "limit", "rel_error"])
            for r in study["rows"]:
                w.writerow([repr(r["h"]), repr(r["E_over_h2"]), repr(r["limit"]), repr(r["rel_error"])])
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(study, fh, indent=2)
