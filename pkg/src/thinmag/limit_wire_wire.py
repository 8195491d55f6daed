"""Coupled limit energy of two joined wires with a shared junction vector.

Wire a runs along x3 and wire b along x1; both start at the junction.  The
junction value is stored once, so continuity holds exactly for every field the
optimizer visits.  Wire a feeds (m1, m2) into the shape-coefficient quadratic
form, wire b feeds (m2, m3).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .shape_coeffs import ShapeCoefficients
from .sphere_field import (EnergyBreakdown, MinimizeOptions, ZeroAnisotropy, check_unit,
                     default_starts, minimize, multistart, normalize)
from .limit_wire_film import WireEnergy, sample_field

A_COMPONENTS = (0, 1)
B_COMPONENTS = (1, 2)


class JoinedWireField:
    """Storage ``[junction, a_1..a_Na, b_1..b_Nb]`` of unit vectors."""

    def __init__(self, N_a, N_b, nodes=None):
        if N_a < 2 or N_b < 2:
            raise InvalidArgument("each wire needs at least 2 intervals")
        self.N_a, self.N_b = int(N_a), int(N_b)
        n = self.N_a + self.N_b + 1
        if nodes is None:
            nodes = np.tile([0.0, 0.0, 1.0], (n, 1))
        nodes = check_unit(np.array(nodes, dtype=float))
        if nodes.shape != (n, 3):
            raise InvalidArgument(f"joined field storage must have shape ({n}, 3)")
        self.nodes = nodes

    @property
    def index_a(self):
        return np.arange(self.N_a + 1)

    @property
    def index_b(self):
        return np.concatenate([[0], np.arange(self.N_a + 1, self.N_a + self.N_b + 1)])

    @property
    def m_a(self):
        return self.nodes[self.index_a]

    @property
    def m_b(self):
        return self.nodes[self.index_b]

    @property
    def junction(self):
        return self.nodes[0].copy()

    def set_a(self, j, v):
        self.nodes[self.index_a[j]] = normalize(v)

    def set_b(self, j, v):
        self.nodes[self.index_b[j]] = normalize(v)

    @classmethod
    def from_profiles(cls, m_a, m_b):
        m_a, m_b = np.asarray(m_a, dtype=float), np.asarray(m_b, dtype=float)
        if not np.array_equal(m_a[0], m_b[0]):
            raise InvalidArgument("profiles disagree at the junction")
        return cls(len(m_a) - 1, len(m_b) - 1, np.concatenate([m_a, m_b[1:]]))

    @classmethod
    def constant(cls, N_a, N_b, vector):
        return cls(N_a, N_b, np.tile(normalize(vector), (N_a + N_b + 1, 1)))


class CoupledEnergy:
    """Functional on the joined storage array; the junction collects both gradients."""

    def __init__(self, lam, coeffs_a, N_a, N_b, anisotropy=None, F_a=None, F_bl=None, coeffs_b=None):
        self.N_a, self.N_b = int(N_a), int(N_b)
        self.wire_a = WireEnergy(lam, coeffs_a, N_a, 1.0, anisotropy, F_a, A_COMPONENTS)
        self.wire_b = WireEnergy(lam, coeffs_b or coeffs_a, N_b, 1.0, anisotropy, F_bl, B_COMPONENTS)
        self.ia = np.arange(self.N_a + 1)
        self.ib = np.concatenate([[0], np.arange(self.N_a + 1, self.N_a + self.N_b + 1)])

    def _check(self, m):
        if m.shape != (self.N_a + self.N_b + 1, 3):
            raise InvalidArgument("joined field has the wrong number of nodes")

    def parts(self, m):
        self._check(m)
        return self.wire_a.energy(m[self.ia]), self.wire_b.energy(m[self.ib])

    def energy(self, m):
        a, b = self.parts(m)
        return a + b

    def metric(self):
        n = self.N_a + self.N_b + 1
        pa = sp.coo_matrix((np.ones(self.N_a + 1), (self.ia, np.arange(self.N_a + 1))), shape=(n, self.N_a + 1))
        pb = sp.coo_matrix((np.ones(self.N_b + 1), (self.ib, np.arange(self.N_b + 1))), shape=(n, self.N_b + 1))
        return (pa @ self.wire_a.metric() @ pa.T + pb @ self.wire_b.metric() @ pb.T).tocsr()

    def gradient(self, m):
        self._check(m)
        g = np.zeros_like(m)
        g[self.ia] += self.wire_a.gradient(m[self.ia])
        np.add.at(g, self.ib, self.wire_b.gradient(m[self.ib]))
        return g


@dataclass
class WireWireParams:
    lam: float
    coeffs: ShapeCoefficients
    N_a: int = 64
    N_b: int = 64
    anisotropy: object = None
    F_a: object = None
    F_bl: object = None
    coeffs_b: ShapeCoefficients = None

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgument("lambda must be positive")
        self.anisotropy = self.anisotropy or ZeroAnisotropy()
        self.F_a = sample_field(self.F_a, self.N_a + 1)
        self.F_bl = sample_field(self.F_bl, self.N_b + 1)

    def functional(self):
        return CoupledEnergy(self.lam, self.coeffs, self.N_a, self.N_b, self.anisotropy,
                             self.F_a, self.F_bl, self.coeffs_b)


def coupled_energy(f, params):
    return params.functional().energy(f.nodes)


def minimize_wire_wire(params, options=MinimizeOptions(), starts=None, workers=1):
    fn = params.functional()
    n = params.N_a + params.N_b + 1
    starts = default_starts(n, options) if starts is None else [np.asarray(s, dtype=float) for s in starts]
    res = multistart(fn, starts, options, workers)
    field = JoinedWireField(params.N_a, params.N_b, res.field)
    return {"field": field, "breakdown": res.breakdown, "converged": res.converged, "result": res}


def penalty_energy(m_a, m_b, params, weight):
    """Oracle variant: junction duplicated and tied by ``weight * |m_a(0) - m_b(0)|^2``."""
    fn = params.functional()
    a = fn.wire_a.energy(np.asarray(m_a, dtype=float))
    b = fn.wire_b.energy(np.asarray(m_b, dtype=float))
    gap = np.asarray(m_a[0]) - np.asarray(m_b[0])
    return (a + b).total + weight * float(gap @ gap)


def minimize_penalty(params, weight, start_a, start_b, options=MinimizeOptions()):
    """Minimise the penalty variant over two independent chains."""
    fn = params.functional()
    na = params.N_a + 1

    class _Penalised:
        def energy(self, m):
            a = fn.wire_a.energy(m[:na])
            b = fn.wire_b.energy(m[na:])
            gap = m[0] - m[na]
            return a + b + EnergyBreakdown(exchange=weight * float(gap @ gap))

        def metric(self):
            tie = sp.coo_matrix(([1.0, -1.0], ([0, na], [0, 0])), shape=(na + params.N_b + 1, 1))
            return (sp.block_diag([fn.wire_a.metric(), fn.wire_b.metric()])
                    + 2.0 * weight * (tie @ tie.T)).tocsr()

        def gradient(self, m):
            g = np.concatenate([fn.wire_a.gradient(m[:na]), fn.wire_b.gradient(m[na:])])
            gap = m[0] - m[na]
            g[0] += 2 * weight * gap
            g[na] -= 2 * weight * gap
            return g

    return minimize(_Penalised(), np.concatenate([start_a, start_b]), options)
