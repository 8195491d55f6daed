"""Unit-vector fields and a projected gradient descent on products of spheres.

Fields are stored as ``(n, 3)`` float arrays, one unit vector per node.  A
*functional* is any object with ``energy(m) -> EnergyBreakdown`` and
``gradient(m) -> ndarray`` (the Euclidean gradient of ``energy(m).total``).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .errors import Diverged, InvalidArgument, InvalidState, StepCollapse

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class EnergyBreakdown:
    exchange: float = 0.0
    anisotropy: float = 0.0
    zeeman: float = 0.0
    magnetostatic: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.exchange + self.anisotropy + self.zeeman + self.magnetostatic)

    def __add__(self, other):
        return EnergyBreakdown(self.exchange + other.exchange, self.anisotropy + other.anisotropy,
                               self.zeeman + other.zeeman, self.magnetostatic + other.magnetostatic)

    def as_dict(self):
        return {"exchange": self.exchange, "anisotropy": self.anisotropy, "zeeman": self.zeeman,
                "magnetostatic": self.magnetostatic, "total": self.total}


# --- anisotropy densities -------------------------------------------------

class ZeroAnisotropy:
    curvature = 0.0

    def value(self, m):
        return np.zeros(len(m))

    def gradient(self, m):
        return np.zeros_like(m)

    def as_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class UniaxialAnisotropy:
    """phi(m) = K (1 - (m . e)^2); even and nonnegative on the sphere."""

    axis: tuple = (0.0, 0.0, 1.0)
    strength: float = 1.0

    def __post_init__(self):
        e = np.asarray(self.axis, dtype=float)
        if e.shape != (3,) or not np.isclose(np.linalg.norm(e), 1.0, atol=1e-9):
            raise InvalidArgument("anisotropy axis must be a unit 3-vector")
        if not self.strength >= 0:
            raise InvalidArgument("anisotropy strength must be nonnegative")
        object.__setattr__(self, "axis", tuple(e / np.linalg.norm(e)))

    @property
    def curvature(self):
        """Bound on the Hessian norm of phi, used to scale preconditioners."""
        return 2.0 * self.strength

    def value(self, m):
        return self.strength * (1.0 - (m @ np.asarray(self.axis)) ** 2)

    def gradient(self, m):
        e = np.asarray(self.axis)
        return -2.0 * self.strength * (m @ e)[:, None] * e[None, :]

    def as_dict(self):
        return {"kind": "uniaxial", "axis": list(self.axis), "strength": self.strength}


def anisotropy_from_dict(doc):
    if doc is None or doc.get("kind", "zero") == "zero":
        extra = set(doc or {}) - {"kind"}
        if extra:
            raise InvalidArgument(f"unknown anisotropy keys {sorted(extra)}")
        return ZeroAnisotropy()
    if doc["kind"] == "uniaxial":
        extra = set(doc) - {"kind", "axis", "strength"}
        if extra:
            raise InvalidArgument(f"unknown anisotropy keys {sorted(extra)}")
        return UniaxialAnisotropy(tuple(doc.get("axis", (0.0, 0.0, 1.0))), float(doc.get("strength", 1.0)))
    raise InvalidArgument(f"unknown anisotropy kind {doc['kind']!r}")


# --- fields -----------------------------------------------------------------

def check_unit(m, tol=UNIT_TOL):
    dev = np.abs(np.linalg.norm(m, axis=-1) - 1.0)
    if dev.size and dev.max() > tol:
        raise InvalidState(f"field is not unit-valued (max deviation {dev.max():.3e})")
    return m


def normalize(m):
    m = np.asarray(m, dtype=float)
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


class DirectorField1D:
    """Unit vectors at the nodes x_j = j / N of [0, 1]."""

    def __init__(self, values):
        values = check_unit(np.array(values, dtype=float))
        if values.ndim != 2 or values.shape[1] != 3 or len(values) < 3:
            raise InvalidArgument("a 1D director field needs shape (N + 1, 3) with N >= 2")
        self.values = values

    @property
    def N(self):
        return len(self.values) - 1

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.N + 1)

    @classmethod
    def constant(cls, N, vector):
        return cls(np.tile(normalize(vector), (N + 1, 1)))

    @classmethod
    def from_function(cls, N, fn):
        x = np.linspace(0.0, 1.0, N + 1)
        return cls(normalize(np.array([fn(t) for t in x])))


class DirectorField2D:
    """Unit vectors at the vertices of a film mesh."""

    def __init__(self, mesh, values):
        values = check_unit(np.array(values, dtype=float))
        if values.shape != (mesh.n_vertices, 3):
            raise InvalidArgument("a 2D director field needs one unit vector per mesh vertex")
        self.mesh = mesh
        self.values = values

    @classmethod
    def constant(cls, mesh, vector):
        return cls(mesh, np.tile(normalize(vector), (mesh.n_vertices, 1)))


def random_unit_field(n, rng):
    return normalize(rng.standard_normal((n, 3)))


# --- manifold primitives ----------------------------------------------------

def project_tangent(m, v):
    """v - (v . m) m, nodewise for (n, 3) inputs."""
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.abs(np.linalg.norm(m, axis=-1) - 1.0).max() > 1e-6:
        raise InvalidState("project_tangent needs unit base vectors")
    return v - np.sum(v * m, axis=-1, keepdims=True) * m


def retract(m, v):
    w = np.asarray(m, dtype=float) + np.asarray(v, dtype=float)
    n = np.linalg.norm(w, axis=-1, keepdims=True)
    if np.min(n) <= 1e-12:
        raise StepCollapse("retraction through the origin")
    return w / n


# --- optimizer --------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeOptions:
    max_iterations: int = 20000
    gradient_tolerance: float = 1e-8
    initial_step: float = 1e-2
    armijo: float = 1e-4
    backtracking: float = 0.5
    seed: int = 0
    multistart: int = 4
    preconditioner: str = "sobolev"

    def __post_init__(self):
        if self.max_iterations < 0 or self.multistart < 0:
            raise InvalidArgument("iteration and multistart counts must be nonnegative")
        if not (self.gradient_tolerance > 0 and self.initial_step > 0):
            raise InvalidArgument("tolerance and initial step must be positive")
        if not 0 < self.armijo <= 0.5:
            raise InvalidArgument("Armijo constant must lie in (0, 1/2]")
        if not 0 < self.backtracking < 1:
            raise InvalidArgument("backtracking ratio must lie in (0, 1)")
        if self.preconditioner not in ("sobolev", "euclidean"):
            raise InvalidArgument("preconditioner must be 'sobolev' or 'euclidean'")

    @classmethod
    def from_dict(cls, doc):
        names = set(cls.__dataclass_fields__)
        extra = set(doc) - names
        if extra:
            raise InvalidArgument(f"unknown optimizer options {sorted(extra)}")
        return cls(**doc)


@dataclass
class MinimizeResult:
    field: np.ndarray
    breakdown: EnergyBreakdown
    iterations: int
    converged: bool
    energy_trace: list
    gradient_trace: list
    step_trace: list
    start_index: int = 0

    @property
    def energy(self):
        return self.breakdown.total

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "energy", "gradient_norm", "step"])
            for k, (e, g, s) in enumerate(zip(self.energy_trace, self.gradient_trace, self.step_trace)):
                w.writerow([k, repr(e), repr(g), repr(s)])


def riemannian_gradient(functional, m):
    return project_tangent(m, functional.gradient(m))


def minimize(functional, start, options=MinimizeOptions()):
    """Projected gradient descent with Armijo backtracking and normalisation retraction.

    The Euclidean gradient is projected nodewise onto the tangent spaces.  With
    ``preconditioner="sobolev"`` and a functional exposing ``metric()`` (a sparse
    SPD nodal matrix), the projected gradient is smoothed by the inverse metric
    and projected again; this is still a descent direction.  Trial steps follow
    the Barzilai-Borwein rule after the first iteration, and only steps meeting
    the Armijo condition are accepted, so the energy trace is non-increasing.
    """
    m = check_unit(np.array(start, dtype=float))
    solve = metric = None
    if options.preconditioner == "sobolev" and hasattr(functional, "metric"):
        metric = functional.metric().tocsc()
        solve = splu(metric).solve
    e = functional.energy(m)
    if not math.isfinite(e.total):
        raise Diverged("non-finite energy at the starting field")

    def directions(m):
        g = riemannian_gradient(functional, m)
        d = g if solve is None else project_tangent(m, solve(g))
        return g, d

    g, d = directions(m)
    gnorm = float(np.abs(g).max()) if g.size else 0.0
    energies, gnorms, steps = [e.total], [gnorm], [0.0]
    step = options.initial_step
    prev = None
    it = 0
    while gnorm > options.gradient_tolerance and it < options.max_iterations:
        if prev is not None:
            s = m - prev[0]
            sy = float(np.sum(s * (g - prev[1])))
            if sy > 0:
                step = float(np.sum(s * (s if metric is None else metric @ s))) / sy
        slope = float(np.sum(g * d))
        t = step
        while True:
            trial = retract(m, -t * d)
            et = functional.energy(trial)
            if not math.isfinite(et.total):
                raise Diverged("non-finite energy during line search")
            if et.total <= e.total - options.armijo * t * slope and et.total <= e.total:
                break
            t *= options.backtracking
            if t < 1e-30 * max(1.0, step):
                t = 0.0
                break
        if t == 0.0:
            break
        prev = (m, g)
        m, e = trial, et
        g, d = directions(m)
        gnorm = float(np.abs(g).max())
        it += 1
        step = t
        energies.append(e.total)
        gnorms.append(gnorm)
        steps.append(t)
    return MinimizeResult(m, e, it, gnorm <= options.gradient_tolerance, energies, gnorms, steps)


def default_starts(n_nodes, options):
    """Constant fields +-e1, +-e2, +-e3 followed by seeded random fields."""
    starts = []
    for k in range(3):
        for sign in (1.0, -1.0):
            v = np.zeros(3)
            v[k] = sign
            starts.append(np.tile(v, (n_nodes, 1)))
    rng = np.random.default_rng(options.seed)
    starts.extend(random_unit_field(n_nodes, rng) for _ in range(options.multistart))
    return starts


def multistart(functional, starts, options=MinimizeOptions(), workers=1):
    """Minimise from every start; keep the lowest total energy, ties to the lowest index."""
    starts = list(starts)
    if not starts:
        raise InvalidArgument("multistart needs at least one start")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda s: minimize(functional, s, options), starts))
    else:
        results = [minimize(functional, s, options) for s in starts]
    best = 0
    for k, r in enumerate(results):
        if r.energy < results[best].energy:
            best = k
    out = results[best]
    out.start_index = best
    out.all_energies = [r.energy for r in results]
    out.runs = results
    return out


def fd_gradient_check(functional, m, direction, h_fd=1e-6):
    """Relative gap between a central difference along ``direction`` and grad . direction."""
    m = check_unit(np.asarray(m, dtype=float))
    d = np.asarray(direction, dtype=float)
    if np.abs(np.sum(d * m, axis=-1)).max() > 1e-10 * max(1.0, np.abs(d).max()):
        raise InvalidArgument("direction must be tangent at every node")
    if not 1e-8 <= h_fd <= 1e-4:
        raise InvalidArgument("h_fd must lie in [1e-8, 1e-4]")
    ep = functional.energy(normalize(m + h_fd * d)).total
    em = functional.energy(normalize(m - h_fd * d)).total
    fd = (ep - em) / (2.0 * h_fd)
    an = float(np.sum(functional.gradient(m) * d))
    return abs(fd - an) / max(1.0, abs(an))
