"""Ferromagnetic wire / thin-film multistructures: shape coefficients, limit energies, 3D checks."""
