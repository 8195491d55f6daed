import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thinmag import sphere_field as sphere
from thinmag.errors import Diverged, InvalidArgument, InvalidState, StepCollapse
from thinmag.sphere_field import (DirectorField1D, EnergyBreakdown, MinimizeOptions, UniaxialAnisotropy,
                                  ZeroAnisotropy, anisotropy_from_dict, default_starts, fd_gradient_check,
                                  normalize, project_tangent, retract)

E3 = np.array([0.0, 0.0, 1.0])


class PullToE3:
    """E(m) = sum |m_j - e3|^2, minimized only by the constant e3."""

    def energy(self, m):
        return EnergyBreakdown(exchange=float(np.sum((m - E3) ** 2)))

    def gradient(self, m):
        return 2.0 * (m - E3)


class Zero:
    def energy(self, m):
        return EnergyBreakdown()

    def gradient(self, m):
        return np.zeros_like(m)


class Chain:
    """Exchange-like chain energy with uniaxial anisotropy; even in m."""

    def __init__(self, n, k=2.0):
        self.n, self.aniso = n, UniaxialAnisotropy((1.0, 0.0, 0.0), k)

    def energy(self, m):
        d = np.diff(m, axis=0)
        return EnergyBreakdown(exchange=float(np.sum(d * d)), anisotropy=float(self.aniso.value(m).sum()))

    def gradient(self, m):
        d = np.diff(m, axis=0)
        g = np.zeros_like(m)
        g[:-1] -= 2 * d
        g[1:] += 2 * d
        return g + self.aniso.gradient(m)


class Blowup(PullToE3):
    def energy(self, m):
        return EnergyBreakdown(exchange=math.inf)


unit3 = arrays(np.float64, 3, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1).map(normalize)
vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10))


# --- primitives ---------------------------------------------------------------

def test_project_tangent_examples():
    np.testing.assert_array_equal(project_tangent(E3, [0, 0, 5]), [0, 0, 0])
    np.testing.assert_array_equal(project_tangent(E3, [1, 2, 3]), [1, 2, 0])
    with pytest.raises(InvalidState):
        project_tangent([0, 0, 1.01], [1, 0, 0])


@settings(max_examples=200, deadline=None)
@given(m=unit3, v=vec3)
def test_project_tangent_orthogonal_idempotent(m, v):
    p = project_tangent(m, v)
    assert abs(p @ m) <= 1e-14 * max(1.0, np.abs(v).max())
    np.testing.assert_allclose(project_tangent(m, p), p, atol=1e-14 * max(1.0, np.abs(v).max()))


def test_retract_examples():
    np.testing.assert_array_equal(retract(E3, np.zeros(3)), E3)
    np.testing.assert_allclose(retract([1.0, 0, 0], [0, 1.0, 0]), [1 / math.sqrt(2), 1 / math.sqrt(2), 0])
    with pytest.raises(StepCollapse):
        retract(E3, -E3)


@settings(max_examples=200, deadline=None)
@given(m=unit3, v=vec3)
def test_retract_is_unit(m, v):
    t = project_tangent(m, v)
    assert abs(np.linalg.norm(retract(m, t)) - 1.0) <= 1e-15 * 2


def test_director_field_invariants():
    f = DirectorField1D.constant(4, [0, 3, 4])
    np.testing.assert_allclose(f.values[0], [0, 0.6, 0.8])
    assert f.N == 4 and f.x[-1] == 1.0
    with pytest.raises(InvalidArgument):
        DirectorField1D.constant(1, E3)
    with pytest.raises(InvalidState):
        DirectorField1D(np.tile([0, 0, 1.001], (5, 1)))


# --- anisotropy -----------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(m=unit3, e=unit3, k=st.floats(0, 10))
def test_anisotropy_even_nonnegative(m, e, k):
    a = UniaxialAnisotropy(tuple(e), k)
    v = a.value(m[None])[0]
    assert v >= -1e-12
    assert v == a.value(-m[None])[0]
    assert ZeroAnisotropy().value(m[None])[0] == 0.0


def test_anisotropy_config():
    assert isinstance(anisotropy_from_dict({"kind": "zero"}), ZeroAnisotropy)
    a = anisotropy_from_dict({"kind": "uniaxial", "axis": [0, 1, 0], "strength": 2})
    assert a.value(np.array([[1.0, 0, 0]]))[0] == 2.0
    for bad in ({"kind": "cubic"}, {"kind": "uniaxial", "axes": [0, 0, 1]},
                {"kind": "uniaxial", "strength": -1}, {"kind": "uniaxial", "axis": [0, 0, 2]}):
        with pytest.raises(InvalidArgument):
            anisotropy_from_dict(bad)


def test_breakdown_total():
    b = EnergyBreakdown(1.0, 2.0, -0.5, 0.25)
    assert b.total == 2.75
    assert (b + b).total == 5.5


# --- options ---------------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"armijo": 0.0}, {"armijo": 0.6}, {"backtracking": 1.0},
                                {"gradient_tolerance": 0.0}, {"initial_step": -1.0},
                                {"max_iterations": -1}, {"preconditioner": "newton"}])
def test_options_validated(kw):
    with pytest.raises(InvalidArgument):
        MinimizeOptions(**kw)


def test_options_from_dict_strict():
    assert MinimizeOptions.from_dict({"seed": 3}).seed == 3
    with pytest.raises(InvalidArgument):
        MinimizeOptions.from_dict({"sead": 3})


# --- minimize ---------------------------------------------------------------------

def test_already_optimal():
    res = sphere.minimize(PullToE3(), np.tile(E3, (5, 1)))
    assert res.iterations == 0 and res.converged


@pytest.mark.parametrize("pre", ["sobolev", "euclidean"])
def test_toy_converges_to_e3(pre):
    start = normalize(np.tile([1.0, 0.0, 1e-3], (6, 1)))
    res = sphere.minimize(PullToE3(), start, MinimizeOptions(preconditioner=pre))
    assert res.converged
    np.testing.assert_allclose(res.field, np.tile(E3, (6, 1)), atol=1e-8)
    assert res.energy <= 1e-15
    assert np.all(np.diff(res.energy_trace) <= 0)


def test_exact_antipode_is_stationary():
    # the Riemannian gradient vanishes at -e3; descent cannot leave it
    res = sphere.minimize(PullToE3(), np.tile(-E3, (3, 1)))
    assert res.iterations == 0 and res.energy == 12.0


def test_rejects_non_unit_start():
    with pytest.raises(InvalidState):
        sphere.minimize(PullToE3(), np.tile([0, 0, 1.1], (3, 1)))


def test_diverged_on_nonfinite_energy():
    with pytest.raises(Diverged):
        sphere.minimize(Blowup(), np.tile([1.0, 0, 0], (3, 1)))


def test_deterministic_trace():
    rng = np.random.default_rng(7)
    start = normalize(rng.standard_normal((20, 3)))
    a = sphere.minimize(Chain(20), start)
    b = sphere.minimize(Chain(20), start)
    assert a.energy_trace == b.energy_trace
    np.testing.assert_array_equal(a.field, b.field)


def test_sign_flip_symmetry():
    rng = np.random.default_rng(11)
    start = normalize(rng.standard_normal((15, 3)))
    a = sphere.minimize(Chain(15), start)
    b = sphere.minimize(Chain(15), -start)
    assert a.energy == pytest.approx(b.energy, abs=1e-10)
    np.testing.assert_allclose(a.field, -b.field, atol=1e-10)


def test_multistart_reduction():
    starts = [np.tile(v, (4, 1)) for v in ([1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [0, 0, 1.0])]
    res = sphere.multistart(PullToE3(), starts, MinimizeOptions(max_iterations=0))
    assert res.all_energies == [8.0, 8.0, 0.0, 0.0]
    assert res.start_index == 2
    with pytest.raises(InvalidArgument):
        sphere.multistart(PullToE3(), [])


def test_multistart_parallel_matches_serial():
    opts = MinimizeOptions(multistart=3, seed=5)
    starts = default_starts(12, opts)
    a = sphere.multistart(Chain(12), starts, opts, workers=1)
    b = sphere.multistart(Chain(12), starts, opts, workers=4)
    assert a.all_energies == b.all_energies and a.start_index == b.start_index


def test_default_starts():
    s = default_starts(5, MinimizeOptions(multistart=2, seed=1))
    assert len(s) == 8
    np.testing.assert_array_equal(s[5], np.tile(-E3, (5, 1)))
    t = default_starts(5, MinimizeOptions(multistart=2, seed=1))
    np.testing.assert_array_equal(s[-1], t[-1])


def test_trace_csv(tmp_path):
    res = sphere.minimize(Chain(6), normalize(np.random.default_rng(0).standard_normal((6, 3))))
    path = tmp_path / "trace.csv"
    res.write_trace_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,energy,gradient_norm,step"
    assert len(lines) == res.iterations + 2


# --- fd_gradient_check ------------------------------------------------------------

def test_fd_check_zero_functional(rng):
    m = normalize(rng.standard_normal((4, 3)))
    assert fd_gradient_check(Zero(), m, project_tangent(m, rng.standard_normal((4, 3)))) == 0.0


def test_fd_check_detects_wrong_gradient(rng):
    class Wrong(Chain):
        def gradient(self, m):
            return 1.5 * super().gradient(m)

    m = normalize(rng.standard_normal((8, 3)))
    d = project_tangent(m, rng.standard_normal((8, 3)))
    assert fd_gradient_check(Chain(8), m, d) <= 1e-7
    assert fd_gradient_check(Wrong(8), m, d) > 1e-3


def test_fd_check_preconditions(rng):
    m = normalize(rng.standard_normal((4, 3)))
    with pytest.raises(InvalidArgument):
        fd_gradient_check(Chain(4), m, m)
    with pytest.raises(InvalidArgument):
        fd_gradient_check(Chain(4), m, project_tangent(m, rng.standard_normal((4, 3))), h_fd=1e-3)
