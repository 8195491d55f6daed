"""
Wire on a thin film
===================

The limit energy splits into a 1D wire problem and a 2D film problem that
share no term.  With no anisotropy and no applied field the wire prefers its
own axis and the film prefers any in-plane direction.
"""
# %%
import numpy as np

from thinmag.limit_wire_film import WireFilmParams, minimize_wire_film
from thinmag.mesh2d import footprint_mesh, polygon_from_disc
from thinmag.shape_coeffs import coefficients
from thinmag.sphere_field import MinimizeOptions, UniaxialAnisotropy

theta = polygon_from_disc((0.0, 0.0), 1.0, 64)
coeffs = coefficients(theta, R_levels=(8.0, 16.0), h=0.05)
film = footprint_mesh(theta, 0.1)

# %%
# Free case: multistart from the six axis directions plus random fields.
params = WireFilmParams(1.0, theta.area, coeffs, film, N=64)
out = minimize_wire_film(params, MinimizeOptions(seed=1))
wire, flm = out["wire"], out["film"]
print("wire energy", wire.energy, "first node", np.round(wire.field[0], 6))
print("film energy", flm.energy, "max |m3|", np.abs(flm.field[:, 2]).max())

# %%
# An easy axis along e1 competes with the stray-field term (alpha/2) m1^2.
# Pointing along e3 costs |Theta| K, pointing along e1 costs alpha/2, so the
# wire switches at K = alpha / (2 |Theta|), about 0.25 for the unit disc.
for K in (0.1, 0.5):
    p = WireFilmParams(1.0, theta.area, coeffs, film, N=64,
                       anisotropy=UniaxialAnisotropy((1.0, 0.0, 0.0), K))
    w = minimize_wire_film(p, MinimizeOptions(multistart=2))["wire"]
    print(f"K={K}: wire direction {np.round(np.abs(w.field[32]), 4)}, energy {w.energy:.5f}")
