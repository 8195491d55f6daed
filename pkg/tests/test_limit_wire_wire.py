import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinmag.errors import InvalidArgument
from thinmag.limit_wire_wire import (CoupledEnergy, JoinedWireField, WireWireParams, coupled_energy,
                                     minimize_penalty, minimize_wire_wire, penalty_energy)
from thinmag.shape_coeffs import ShapeCoefficients
from thinmag.sphere_field import (MinimizeOptions, UniaxialAnisotropy, fd_gradient_check, normalize,
                                  project_tangent)

from .oracles import best_constant

SQ = ShapeCoefficients(0.5, 0.5, 0.0)
SKEW = ShapeCoefficients(0.3, 0.7, 0.2)
SWAP = [2, 1, 0]


def random_joined(rng, Na=12, Nb=9):
    return JoinedWireField(Na, Nb, normalize(rng.standard_normal((Na + Nb + 1, 3))))


# --- field container ----------------------------------------------------------------

def test_junction_shared(rng):
    f = random_joined(rng)
    g = JoinedWireField(f.N_a, f.N_b, f.nodes.copy())
    v = normalize(rng.standard_normal(3))
    f.set_a(0, v)
    g.set_b(0, v)
    np.testing.assert_array_equal(f.nodes, g.nodes)
    assert np.array_equal(f.m_a[0], f.m_b[0])
    p = WireWireParams(1.0, SKEW, 12, 9)
    assert coupled_energy(f, p) == coupled_energy(g, p)


def test_from_profiles(rng):
    f = random_joined(rng)
    g = JoinedWireField.from_profiles(f.m_a, f.m_b)
    np.testing.assert_array_equal(f.nodes, g.nodes)
    bad = f.m_b.copy()
    bad[0] = -bad[0]
    with pytest.raises(InvalidArgument):
        JoinedWireField.from_profiles(f.m_a, bad)
    with pytest.raises(InvalidArgument):
        JoinedWireField(1, 5)


# --- energy -------------------------------------------------------------------------

def test_constant_e2_uses_both_mappings():
    p = WireWireParams(1.0, SKEW, 16, 16)
    e = coupled_energy(JoinedWireField.constant(16, 16, [0, 1, 0]), p)
    # wire a: m2 pairs with beta; wire b: m2 pairs with alpha
    assert e.total == pytest.approx(0.5 * SKEW.beta + 0.5 * SKEW.alpha, rel=1e-14)
    e_sq = coupled_energy(JoinedWireField.constant(16, 16, [0, 1, 0]), WireWireParams(1.0, SQ, 16, 16))
    assert e_sq.total == pytest.approx(SQ.alpha, rel=1e-14)


def test_constant_e3_only_wire_b():
    p = WireWireParams(1.0, SKEW, 16, 16)
    a, b = p.functional().parts(JoinedWireField.constant(16, 16, [0, 0, 1]).nodes)
    assert a.total == 0.0
    assert b.total == pytest.approx(0.5 * SKEW.beta, rel=1e-14)


def test_constant_e1_only_wire_a():
    p = WireWireParams(1.0, SKEW, 16, 16)
    a, b = p.functional().parts(JoinedWireField.constant(16, 16, [1, 0, 0]).nodes)
    assert a.total == pytest.approx(0.5 * SKEW.alpha, rel=1e-14)
    assert b.total == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.floats(0, 3), lam=st.floats(0.01, 10))
def test_swap_symmetry(seed, k, lam):
    rng = np.random.default_rng(seed)
    N = 10
    f = random_joined(rng, N, N)
    Fa, Fb = rng.standard_normal((N + 1, 3)), rng.standard_normal((N + 1, 3))
    axis = normalize(rng.standard_normal(3))
    p = WireWireParams(lam, SKEW, N, N, UniaxialAnisotropy(tuple(axis), k), Fa, Fb)
    q = WireWireParams(lam, SKEW.swapped(), N, N, UniaxialAnisotropy(tuple(axis[SWAP]), k),
                       Fb[:, SWAP], Fa[:, SWAP])
    g = JoinedWireField.from_profiles(f.m_b[:, SWAP], f.m_a[:, SWAP])
    assert coupled_energy(g, q).total == pytest.approx(coupled_energy(f, p).total, rel=1e-12, abs=1e-12)


def test_sample_mismatch():
    with pytest.raises(InvalidArgument):
        WireWireParams(1.0, SQ, 8, 8, F_a=np.zeros((5, 3)))
    with pytest.raises(InvalidArgument):
        WireWireParams(1.0, SQ, 8, 8).functional().energy(np.tile([0, 0, 1.0], (5, 1)))


def test_gradients_including_junction(rng):
    p = WireWireParams(0.8, SKEW, 14, 11, UniaxialAnisotropy((0.0, 0.6, 0.8), 1.3),
                       rng.standard_normal((15, 3)), rng.standard_normal((12, 3)))
    fn = p.functional()
    for _ in range(10):
        m = normalize(rng.standard_normal((26, 3)))
        d = project_tangent(m, rng.standard_normal((26, 3)))
        assert fd_gradient_check(fn, m, d, 1e-6) <= 1e-5
        dj = np.zeros_like(d)
        dj[0] = d[0]
        assert fd_gradient_check(fn, m, dj, 1e-6) <= 1e-5


# --- minimization -------------------------------------------------------------------

class JunctionWatch:
    """Wraps a coupled energy and confirms the junction is shared at every evaluation."""

    def __init__(self, fn):
        self.fn, self.checked = fn, 0

    def energy(self, m):
        f = JoinedWireField(self.fn.N_a, self.fn.N_b, m)
        assert np.array_equal(f.m_a[0], f.m_b[0])
        self.checked += 1
        return self.fn.energy(m)

    def gradient(self, m):
        return self.fn.gradient(m)

    def metric(self):
        return self.fn.metric()


def constant_oracle(coeffs, Fa=(0, 0, 0), Fb=(0, 0, 0)):
    def energy(c):
        q = coeffs.quadratic_form(c[:, 0], c[:, 1]) + coeffs.quadratic_form(c[:, 1], c[:, 2])
        return 0.5 * q - 2.0 * (c @ np.asarray(Fa, float)) - 2.0 * (c @ np.asarray(Fb, float))
    return best_constant(energy)


def test_free_case_large_lambda():
    out = minimize_wire_wire(WireWireParams(100.0, SQ, 32, 32))
    e_oracle, _ = constant_oracle(SQ)
    assert e_oracle == pytest.approx(0.5 * SQ.alpha, rel=1e-12)
    assert out["breakdown"].total == pytest.approx(e_oracle, rel=1e-3)
    assert abs(out["field"].junction[1]) <= 1e-3
    assert out["converged"]


def test_free_case_beats_constants_at_moderate_lambda():
    # the constant field is a saddle point: a boundary layer at the far ends lowers the energy
    out = minimize_wire_wire(WireWireParams(1.0, SQ, 32, 32))
    e = out["breakdown"].total
    assert e < 0.5 * SQ.alpha - 5e-3
    assert 0.5 * SQ.alpha - e == pytest.approx(0.0104 * SQ.alpha / 0.5, rel=0.1)


def test_junction_exact_at_every_iterate():
    p = WireWireParams(0.5, SQ, 16, 16, F_a=[0, 0, 1.0], F_bl=[1.0, 0, 0])
    watch = JunctionWatch(p.functional())
    from thinmag import sphere_field as sphere
    rng = np.random.default_rng(1)
    sphere.minimize(watch, normalize(rng.standard_normal((33, 3))))
    assert watch.checked > 10


def test_opposing_fields_small_lambda():
    p = WireWireParams(0.01, SQ, 64, 64, F_a=[0, 0, 10.0], F_bl=[10.0, 0, 0])
    out = minimize_wire_wire(p)
    f = out["field"]
    e_const, _ = constant_oracle(SQ, [0, 0, 10.0], [10.0, 0, 0])
    assert out["breakdown"].total < e_const
    assert np.abs(f.m_a[16:] - [0, 0, 1]).max() < 1e-2
    assert np.abs(f.m_b[16:] - [1, 0, 0]).max() < 1e-2
    steps = np.linalg.norm(np.diff(f.m_a, axis=0), axis=1)
    assert steps.max() < 0.5


def test_huge_e2_anisotropy_not_worse_than_candidate():
    p = WireWireParams(1.0, SQ, 16, 16, UniaxialAnisotropy((0, 1, 0), 1e3))
    out = minimize_wire_wire(p, MinimizeOptions(multistart=2))
    cand = coupled_energy(JoinedWireField.constant(16, 16, [0, 1, 0]), p).total
    assert out["breakdown"].total <= cand + 1e-12


def test_penalty_oracle_converges_to_shared_storage():
    p = WireWireParams(0.1, SQ, 32, 32, F_a=[0, 0, 2.0], F_bl=[2.0, 0, 0])
    out = minimize_wire_wire(p)
    shared = out["breakdown"].total
    f = out["field"]
    assert penalty_energy(f.m_a, f.m_b, p, 1e6) == pytest.approx(shared, rel=1e-14)
    gaps = []
    for w in (1e4, 1e6):
        r = minimize_penalty(p, w, f.m_a, f.m_b)
        assert r.converged
        gaps.append(shared - r.energy)
    assert 0 <= gaps[1] < gaps[0] < 1e-3
    assert gaps[1] < 1e-6
