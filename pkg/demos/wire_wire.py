"""
Two wires joined at a corner
============================

Wire a runs along x3 and wire b along x1.  They share the junction vector,
stored once.  Wire a's stray-field term acts on (m1, m2) and wire b's on
(m2, m3).
"""
# %%
import numpy as np

from thinmag.limit_wire_wire import WireWireParams, minimize_wire_wire
from thinmag.mesh2d import CrossSection
from thinmag.shape_coeffs import coefficients

square = CrossSection.rectangle((-1.0, -1.0), (0.0, 0.0))
c = coefficients(square, R_levels=(8.0, 16.0), h=0.05)
print(f"square: alpha={c.alpha:.5f} beta={c.beta:.5f} gamma={c.gamma:.1e}")

# %%
# Constant fields on the great circle m2 = 0 cost alpha/2.  With finite
# exchange the ends of both wires relax toward their own axes, so the
# minimum sits slightly below alpha/2, by roughly 0.0104 / lambda here.
for lam in (1.0, 10.0, 100.0):
    out = minimize_wire_wire(WireWireParams(lam, c, 64, 64))
    e = out["breakdown"].total
    print(f"lambda={lam:6.1f}  E={e:.6f}  alpha/2 - E={0.5 * c.alpha - e:.2e}  "
          f"junction={np.round(out['field'].junction, 4)}")

# %%
# Opposing applied fields force a transition through the junction.
out = minimize_wire_wire(WireWireParams(0.01, c, 64, 64, F_a=[0, 0, 10.0], F_bl=[10.0, 0, 0]))
f = out["field"]
print("m_a near the far end", np.round(f.m_a[-1], 4))
print("m_b near the far end", np.round(f.m_b[-1], 4))
print("junction", np.round(f.junction, 4))
