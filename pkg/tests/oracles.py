"""Independent reference computations used by the tests."""
import numpy as np
from scipy import integrate


def sphere_grid(n_theta=721, n_phi=1440):
    """Latitude-longitude grid of unit vectors, poles included."""
    t = np.linspace(0.0, np.pi, n_theta)
    p = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    T, P = np.meshgrid(t, p, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)


def best_constant(energy_of_c, grid=None):
    """Minimum of a constant-field energy over a dense S^2 grid."""
    c = sphere_grid() if grid is None else grid
    e = energy_of_c(c)
    k = int(np.argmin(e))
    return float(e[k]), c[k]


def cube_demag_energy():
    """Magnetostatic energy of the unit cube with M = e3, from surface charges.

    E = 1/(8 pi) sum over charged faces of sigma sigma' / |x - y|.  The two
    faces z=0 and z=1 carry charges -1 and +1, so
    E = (I_self - I_opp) / (4 pi) with the double integrals below.
    """
    s2 = np.sqrt(2.0)
    # Closed form of int_{[0,1]^4} 1/|x-y| over one unit square.
    i_self = 4.0 / 3.0 * (1.0 - s2) + 4.0 * np.log(1.0 + s2)

    # Opposite faces at unit distance; reduce to the difference density
    # (1-|u|)(1-|v|) on [-1,1]^2 and integrate over one quadrant.
    def f(v, u):
        return (1 - u) * (1 - v) / np.sqrt(u * u + v * v + 1.0)

    quad, _ = integrate.dblquad(f, 0.0, 1.0, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    i_opp = 4.0 * quad
    return (i_self - i_opp) / (4.0 * np.pi)
