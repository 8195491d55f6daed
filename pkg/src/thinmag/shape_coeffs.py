"""Shape coefficients of a cross-section from two exterior transmission problems.

For a bounded section S the potentials p and q minimise, over gradients in
L2(R^2), the Dirichlet energy driven by the uniform field e1 (resp. e2)
restricted to S:

    int Dp . Dphi = int_S d phi / dx1,    int Dq . Dphi = int_S d phi / dx2.

The coefficients are alpha = int |Dp|^2, beta = int |Dq|^2 and
gamma = 2 int Dp . Dq.  The plane is truncated to a disk of radius R with zero
Dirichlet data; the resulting error behaves like c / R^2 and is removed by
extrapolation over several radii.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import AssemblyFailure, InvalidArgument, SolverFailure
from .mesh2d import INTERFACE, Mesh2D, triangulate

FIRST_AXIS, SECOND_AXIS = "first_axis", "second_axis"
_AXIS = {FIRST_AXIS: 0, SECOND_AXIS: 1}


def p1_gradients(mesh):
    """Constant gradients of the three hat functions on every triangle, shape (m, 3, 2)."""
    p = mesh.points[mesh.triangles]
    area = mesh.areas
    bad = np.flatnonzero(~(area > 0))
    if bad.size:
        raise AssemblyFailure(f"degenerate or inverted triangle {bad[0]} (area {area[bad[0]]:.3e})",
                              triangle_index=int(bad[0]))
    # grad phi_i = rot90(opposite edge) / (2 area)
    e = np.roll(p, -1, axis=1) - np.roll(p, -2, axis=1)
    g = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return -g


def element_stiffness(mesh):
    g = p1_gradients(mesh)
    return np.einsum("tid,tjd->tij", g, g) * mesh.areas[:, None, None]


def assemble_stiffness(mesh):
    """Unconstrained P1 Laplace stiffness matrix (CSR, symmetric, constants in the kernel)."""
    ke = element_stiffness(mesh)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_rhs(mesh, direction):
    """Entries int_S d(phi_i)/dx_k over the inside triangles (volume form)."""
    k = _axis(direction)
    g = p1_gradients(mesh)[mesh.inside, :, k] * mesh.areas[mesh.inside, None]
    return np.bincount(mesh.triangles[mesh.inside].ravel(), weights=g.ravel(),
                       minlength=mesh.n_vertices)


def assemble_rhs_boundary(mesh, direction):
    """Same vector via the divergence theorem: int_{dS} phi_i nu_k ds on interface edges."""
    k = _axis(direction)
    edges = mesh.interface_edges
    # orient each interface edge so that the inside triangle lies on its left
    inside_dir = {}
    for tri in mesh.triangles[mesh.inside]:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            inside_dir[(a, b)] = True
    b = np.zeros(mesh.n_vertices)
    for i, j in edges:
        if (i, j) not in inside_dir:
            i, j = j, i
        t = mesh.points[j] - mesh.points[i]
        normal = np.array([t[1], -t[0]])  # outward, length = edge length
        b[[i, j]] += 0.5 * normal[k]
    return b


def _axis(direction):
    try:
        return _AXIS[direction]
    except KeyError:
        raise InvalidArgument(f"direction must be one of {sorted(_AXIS)}") from None


@dataclass(frozen=True, eq=False)
class ScalarFieldP1:
    """Nodal values of a P1 potential pinned to zero on the truncation circle."""

    mesh: Mesh2D
    values: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        if self.values.shape != (self.mesh.n_vertices,):
            raise InvalidArgument("field size does not match the mesh")
        if not np.all(np.isfinite(self.values)):
            raise SolverFailure("non-finite potential values")


class TransmissionSolver:
    """Pinned stiffness system of one mesh, reused across right-hand sides."""

    def __init__(self, mesh, stiffness=None):
        self.mesh = mesh
        self.stiffness = assemble_stiffness(mesh) if stiffness is None else stiffness
        free = np.ones(mesh.n_vertices, dtype=bool)
        free[mesh.outer_vertices] = False
        self.free = np.flatnonzero(free)
        self.K = self.stiffness[self.free][:, self.free].tocsr()
        self.inv_diag = 1.0 / self.K.diagonal()

    def solve(self, rhs, tol=1e-10, maxiter=None):
        rhs = np.asarray(rhs, dtype=float)
        u = np.zeros(self.mesh.n_vertices)
        b = rhs[self.free]
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return ScalarFieldP1(self.mesh, u)
        maxiter = maxiter or max(1000, 10 * len(b))
        precond = sp.diags(self.inv_diag)
        x, info = cg(self.K, b, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
        res = float(np.linalg.norm(b - self.K @ x) / bnorm)
        if info != 0 or res > tol * 1.0001:
            raise SolverFailure(f"CG stopped at relative residual {res:.3e} (info={info})", residual=res)
        u[self.free] = x
        return ScalarFieldP1(self.mesh, u, residual=res, iterations=int(info))


def solve_transmission(mesh, rhs, tol=1e-10):
    """Conjugate-gradient solution of the pinned transmission system."""
    return TransmissionSolver(mesh).solve(rhs, tol)


def dirichlet_energy(mesh, u, v):
    """Exact int Du . Dv over the truncated disk for P1 fields."""
    uv = [w.values if isinstance(w, ScalarFieldP1) else np.asarray(w, dtype=float) for w in (u, v)]
    for w, raw in zip((u, v), uv):
        if isinstance(w, ScalarFieldP1) and w.mesh is not mesh:
            raise InvalidArgument("field belongs to a different mesh")
        if raw.shape != (mesh.n_vertices,):
            raise InvalidArgument("field size does not match the mesh")
    g = p1_gradients(mesh)
    du = np.einsum("tid,ti->td", g, uv[0][mesh.triangles])
    dv = np.einsum("tid,ti->td", g, uv[1][mesh.triangles])
    return float(np.sum(mesh.areas * np.einsum("td,td->t", du, dv)))


@dataclass(frozen=True)
class LevelResult:
    radius: float
    h: float
    alpha: float
    beta: float
    gamma: float
    gamma_boundary: float
    n_vertices: int


@dataclass(frozen=True)
class ShapeCoefficients:
    alpha: float
    beta: float
    gamma: float
    error_estimate: float = 0.0
    levels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta >= 0):
            raise InvalidArgument("alpha and beta must be nonnegative")
        if abs(self.gamma) > 2.0 * math.sqrt(self.alpha * self.beta) * (1 + 1e-9) + 1e-12:
            raise InvalidArgument("gamma violates |gamma| <= 2 sqrt(alpha beta)")
        if self.error_estimate < 0:
            raise InvalidArgument("error estimate must be nonnegative")

    def quadratic_form(self, c1, c2):
        """alpha c1^2 + beta c2^2 + gamma c1 c2 (elementwise on arrays)."""
        return self.alpha * c1 * c1 + self.beta * c2 * c2 + self.gamma * c1 * c2

    def swapped(self):
        return ShapeCoefficients(self.beta, self.alpha, self.gamma, self.error_estimate, self.levels)

    def as_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "error_estimate": self.error_estimate,
                "levels": [vars(lv) for lv in self.levels]}

    @classmethod
    def disc(cls, radius=1.0):
        """Closed-form values for a disc: alpha = beta = pi r^2 / 2, gamma = 0."""
        a = 0.5 * math.pi * radius**2
        return cls(a, a, 0.0)

    @classmethod
    def from_dict(cls, doc):
        return cls(float(doc["alpha"]), float(doc["beta"]), float(doc["gamma"]),
                   float(doc.get("error_estimate", 0.0)))


@dataclass
class TransmissionPair:
    """p, q and the data they were computed from on one mesh."""

    mesh: Mesh2D
    solver: TransmissionSolver
    rhs_p: np.ndarray
    rhs_q: np.ndarray
    p: ScalarFieldP1
    q: ScalarFieldP1

    @classmethod
    def solve(cls, mesh, tol=1e-10):
        solver = TransmissionSolver(mesh)
        rp = assemble_rhs(mesh, FIRST_AXIS)
        rq = assemble_rhs(mesh, SECOND_AXIS)
        return cls(mesh, solver, rp, rq, solver.solve(rp, tol), solver.solve(rq, tol))

    def raw_coefficients(self):
        m = self.mesh
        return (dirichlet_energy(m, self.p, self.p), dirichlet_energy(m, self.q, self.q),
                2.0 * dirichlet_energy(m, self.p, self.q))


def gamma_boundary_check(mesh, p, q):
    """int_S dq/dx1 + int_S dp/dx2, the boundary-integral form of gamma."""
    return float(assemble_rhs(mesh, FIRST_AXIS) @ q.values + assemble_rhs(mesh, SECOND_AXIS) @ p.values)


def superposition_check(mesh, c, tol=1e-10):
    """Relative energy-norm gap between p_c and c1 p + c2 q."""
    c1, c2 = map(float, c)
    if c1 == 0.0 and c2 == 0.0:
        raise InvalidArgument("c must be nonzero")
    pair = TransmissionPair.solve(mesh, tol)
    pc = pair.solver.solve(c1 * pair.rhs_p + c2 * pair.rhs_q, tol)
    diff = pc.values - (c1 * pair.p.values + c2 * pair.q.values)
    return math.sqrt(max(dirichlet_energy(mesh, diff, diff), 0.0) / dirichlet_energy(mesh, pc, pc))


def extrapolate(radii, values, exponent=2.0):
    """Least-squares fit v(R) = v_inf + c R^-exponent; returns v_inf."""
    radii = np.asarray(radii, dtype=float)
    a = np.column_stack([np.ones_like(radii), radii**-exponent])
    sol, *_ = np.linalg.lstsq(a, np.asarray(values, dtype=float), rcond=None)
    return float(sol[0])


def coefficients(section, R_levels=(8.0, 16.0), h=0.05, tol=1e-10, grading=0.25):
    """alpha, beta, gamma of ``section`` extrapolated in the truncation radius."""
    radii = sorted(float(r) for r in R_levels)
    if len(radii) < 2:
        raise InvalidArgument("at least two truncation radii are required")
    levels = []
    for R in radii:
        mesh = triangulate(section, R, h, grading=grading)
        pair = TransmissionPair.solve(mesh, tol)
        a, b, g = pair.raw_coefficients()
        gb = gamma_boundary_check(mesh, pair.p, pair.q)
        levels.append(LevelResult(R, h, a, b, g, gb, mesh.n_vertices))
    ext = [extrapolate(radii, [getattr(lv, k) for lv in levels]) for k in ("alpha", "beta", "gamma")]
    fine = levels[-1]
    err = max(abs(fine.alpha - ext[0]), abs(fine.beta - ext[1]), abs(fine.gamma - ext[2]))
    return ShapeCoefficients(ext[0], ext[1], ext[2], err, tuple(levels))


def mesh_refinement_error(section, R, h, tol=1e-10):
    """Change of the raw coefficients between target sizes h and h/2 at fixed R."""
    out = []
    for hh in (h, h / 2):
        pair = TransmissionPair.solve(triangulate(section, R, hh), tol)
        out.append(np.array(pair.raw_coefficients()))
    return float(np.abs(out[1] - out[0]).max())
