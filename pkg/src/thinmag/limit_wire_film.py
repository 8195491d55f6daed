"""Limit energy of a wire standing on a thin film.

The wire carries a 1D director field on [0, 1] (axis x3) and the film a 2D
field on its footprint.  The two energies share no term, so they are minimised
independently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .mesh2d import Mesh2D
from .shape_coeffs import ShapeCoefficients, assemble_stiffness, p1_gradients
from .sphere_field import (EnergyBreakdown, MinimizeOptions, ZeroAnisotropy, default_starts, multistart)


def trapezoid_weights(N):
    w = np.full(N + 1, 1.0 / N)
    w[[0, -1]] *= 0.5
    return w


def lumped_mass(mesh):
    return np.bincount(mesh.triangles.ravel(), weights=np.repeat(mesh.areas / 3.0, 3),
                       minlength=mesh.n_vertices)


def sample_field(spec, n):
    """Constant 3-vector broadcast to n samples, or an explicit (n, 3) array."""
    a = np.asarray(spec if spec is not None else (0.0, 0.0, 0.0), dtype=float)
    if a.shape == (3,):
        return np.tile(a, (n, 1))
    if a.shape != (n, 3):
        raise InvalidArgument(f"field samples must have shape (3,) or ({n}, 3), got {a.shape}")
    return a.copy()


class WireEnergy:
    """Discrete wire energy.

    ``components`` selects which two magnetization components enter the
    shape-coefficient quadratic form (first pairs with alpha, second with beta).
    """

    def __init__(self, lam, coeffs, N, weight=1.0, anisotropy=None, field=None, components=(0, 1)):
        if not lam > 0:
            raise InvalidArgument("lambda must be positive")
        if not weight > 0:
            raise InvalidArgument("cross-section area must be positive")
        if int(N) != N or N < 2:
            raise InvalidArgument("wire grid size N must be an integer >= 2")
        self.lam, self.coeffs, self.N, self.weight = float(lam), coeffs, int(N), float(weight)
        self.anisotropy = anisotropy or ZeroAnisotropy()
        self.field = sample_field(field, self.N + 1)
        self.components = tuple(components)
        self.w = trapezoid_weights(self.N)
        c = coeffs
        self.Q = np.array([[c.alpha, 0.5 * c.gamma], [0.5 * c.gamma, c.beta]])

    def _check(self, m):
        if m.shape != (self.N + 1, 3):
            raise InvalidArgument(f"wire field must have shape ({self.N + 1}, 3)")

    def energy(self, m):
        self._check(m)
        dx = 1.0 / self.N
        d = np.diff(m, axis=0)
        exchange = self.lam * self.weight * float(np.sum(d * d)) / dx
        anis = self.weight * float(self.w @ self.anisotropy.value(m))
        zeeman = -2.0 * self.weight * float(self.w @ np.sum(self.field * m, axis=1))
        mc = m[:, self.components]
        mag = 0.5 * float(self.w @ np.einsum("ni,ij,nj->n", mc, self.Q, mc))
        return EnergyBreakdown(exchange, anis, zeeman, mag)

    def metric(self):
        """Nodal mass plus the exchange Hessian, used to precondition descent."""
        n = self.N + 1
        lap = sp.diags([np.r_[1.0, np.full(n - 2, 2.0), 1.0], -np.ones(n - 1), -np.ones(n - 1)], [0, 1, -1])
        mass = self.w * (1.0 + self.weight * getattr(self.anisotropy, "curvature", 0.0))
        return (sp.diags(mass) + (2.0 * self.lam * self.weight * self.N) * lap).tocsr()

    def gradient(self, m):
        self._check(m)
        dx = 1.0 / self.N
        d = np.diff(m, axis=0)
        g = np.zeros_like(m)
        c = 2.0 * self.lam * self.weight / dx
        g[:-1] -= c * d
        g[1:] += c * d
        g += self.weight * self.w[:, None] * self.anisotropy.gradient(m)
        g -= 2.0 * self.weight * self.w[:, None] * self.field
        mc = m[:, self.components]
        g[:, self.components] += self.w[:, None] * (mc @ self.Q)
        return g


class FilmEnergy:
    """P1 exchange plus lumped anisotropy, Zeeman and out-of-plane penalty on a film mesh."""

    def __init__(self, lam, mesh, anisotropy=None, field=None):
        if not lam > 0:
            raise InvalidArgument("lambda must be positive")
        self.lam, self.mesh = float(lam), mesh
        self.anisotropy = anisotropy or ZeroAnisotropy()
        self.field = sample_field(field, mesh.n_vertices)
        self.K = assemble_stiffness(mesh)
        self.mass = lumped_mass(mesh)
        self._grads = p1_gradients(mesh)[:, 1:, :]

    def _check(self, m):
        if m.shape != (self.mesh.n_vertices, 3):
            raise InvalidArgument("film field must have one vector per film vertex")

    def energy(self, m):
        self._check(m)
        # differences to the first vertex keep constants at exactly zero
        t = self.mesh.triangles
        dm = m[t[:, 1:]] - m[t[:, :1]]
        grad = np.einsum("tid,tic->tdc", self._grads, dm)
        exchange = self.lam * float(self.mesh.areas @ np.sum(grad * grad, axis=(1, 2)))
        anis = float(self.mass @ self.anisotropy.value(m))
        zeeman = -2.0 * float(self.mass @ np.sum(self.field * m, axis=1))
        mag = 0.5 * float(self.mass @ (m[:, 2] ** 2))
        return EnergyBreakdown(exchange, anis, zeeman, mag)

    def metric(self):
        mass = self.mass * (1.0 + getattr(self.anisotropy, "curvature", 0.0))
        return (sp.diags(mass) + 2.0 * self.lam * self.K).tocsr()

    def gradient(self, m):
        self._check(m)
        g = 2.0 * self.lam * (self.K @ m)
        g += self.mass[:, None] * self.anisotropy.gradient(m)
        g -= 2.0 * self.mass[:, None] * self.field
        g[:, 2] += self.mass * m[:, 2]
        return g


@dataclass
class WireFilmParams:
    lam: float
    theta_area: float
    coeffs: ShapeCoefficients
    film_mesh: Mesh2D
    N: int = 64
    anisotropy: object = None
    F_a: object = None
    F_b: object = None

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgument("lambda must be positive")
        if not self.theta_area > 0:
            raise InvalidArgument("theta_area must be positive")
        if not self.film_mesh.inside.all():
            raise InvalidArgument("film mesh must contain only footprint triangles")
        self.anisotropy = self.anisotropy or ZeroAnisotropy()
        self.F_a = sample_field(self.F_a, self.N + 1)
        self.F_b = sample_field(self.F_b, self.film_mesh.n_vertices)

    def wire_functional(self):
        return WireEnergy(self.lam, self.coeffs, self.N, self.theta_area, self.anisotropy, self.F_a)

    def film_functional(self):
        return FilmEnergy(self.lam, self.film_mesh, self.anisotropy, self.F_b)


def wire_energy(m, params):
    values = getattr(m, "values", m)
    return params.wire_functional().energy(np.asarray(values, dtype=float))


def film_energy(m, params):
    values = getattr(m, "values", m)
    return params.film_functional().energy(np.asarray(values, dtype=float))


def minimize_wire_film(params, options=MinimizeOptions(), workers=1):
    """Independent multistart minimisations of the wire and film energies."""
    wire = params.wire_functional()
    film = params.film_functional()
    wire_res = multistart(wire, default_starts(params.N + 1, options), options, workers)
    film_opts = MinimizeOptions(**{**vars(options), "seed": options.seed + 1})
    film_res = multistart(film, default_starts(params.film_mesh.n_vertices, film_opts), options, workers)
    return {"wire": wire_res, "film": film_res}
