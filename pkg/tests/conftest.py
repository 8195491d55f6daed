import numpy as np
import pytest

from thinmag import limit_wire_wire as wire_wire
from thinmag import sphere_field as sphere

MONITOR = {"runs": 0, "worst_norm": 0.0, "worst_rise": 0.0}


class Recording:
    """Proxy that records the unit-norm defect of every field the optimizer evaluates."""

    def __init__(self, functional):
        self._fn = functional
        self.worst = 0.0
        self.evaluated = 0

    def energy(self, m):
        self.worst = max(self.worst, float(np.abs(np.linalg.norm(m, axis=-1) - 1.0).max()))
        self.evaluated += 1
        return self._fn.energy(m)

    def __getattr__(self, name):
        return getattr(self._fn, name)


_raw_minimize = sphere.minimize


def monitored_minimize(functional, start, options=sphere.MinimizeOptions()):
    rec = Recording(functional)
    res = _raw_minimize(rec, start, options)
    rise = float(np.max(np.diff(res.energy_trace), initial=0.0))
    MONITOR["runs"] += 1
    MONITOR["worst_norm"] = max(MONITOR["worst_norm"], rec.worst)
    MONITOR["worst_rise"] = max(MONITOR["worst_rise"], rise)
    assert rise <= 0.0, f"energy increased by {rise}"
    assert rec.worst <= 1e-12, f"iterate left the sphere by {rec.worst}"
    res.unit_defect = rec.worst
    return res


@pytest.fixture(autouse=True)
def descent_contract(monkeypatch):
    """Every minimization in the suite is checked for monotone energy and unit iterates."""
    monkeypatch.setattr(sphere, "minimize", monitored_minimize)
    monkeypatch.setattr(wire_wire, "minimize", monitored_minimize)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
