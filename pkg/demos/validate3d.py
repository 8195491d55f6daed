"""
Stray-field energy on shrinking 3D structures
=============================================

For branch-constant magnetizations the 3D magnetostatic energy divided by
h^2 should approach the limit quadratic form as h decreases.
"""
# %%
from thinmag.magnetostatic3d import WIRE_FILM, WIRE_WIRE, convergence_study
from thinmag.mesh2d import CrossSection
from thinmag.shape_coeffs import coefficients

unit = CrossSection.rectangle((0.0, 0.0), (1.0, 1.0))
c = coefficients(unit, R_levels=(8.0, 16.0), h=0.05)

cases = [
    ("wire-film, m_a=e1, m_b=e3", WIRE_FILM, [1.0, 0, 0], [0, 0, 1.0], 0.25),
    ("wire-film, m_a=e3, m_b=e1", WIRE_FILM, [0, 0, 1.0], [1.0, 0, 0], 0.25),
    ("wire-wire, m=e2", WIRE_WIRE, [0, 1.0, 0], [0, 1.0, 0], 0.125),
]

# %%
# Each row: h, E/h^2, the limit, relative error (or the value itself when
# the limit is zero).
for label, kind, ma, mb, ratio in cases:
    study = convergence_study(kind, ma, mb, [0.4, 0.2, 0.1], c, unit, delta_ratio=ratio)
    print(label, "monotone" if study["monotone"] else "NOT monotone")
    for r in study["rows"]:
        print(f"   h={r['h']:.2f}  E/h^2={r['E_over_h2']:.4f}  limit={r['limit']:.4f}  "
              f"err={r['rel_error']:.3f}  cells={r['n_cells']}")
