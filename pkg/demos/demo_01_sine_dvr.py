"""
The sine DVR grid
=================

A sine discrete variable representation puts N_b equally spaced nodes
inside a box with hard walls.  Its kinetic matrix has the particle-in-a-box
spectrum exactly, which is the first thing to check on any new grid.
"""

import numpy as np

from mctdhf1d import build_sine_dvr, soft_coulomb_potential

basis = build_sine_dvr(-30.0, 30.0, 181)
print(f"nodes {basis.nodes[0]:.4f} .. {basis.nodes[-1]:.4f}, spacing {basis.spacing:.4f}")

# %%
# Diagonalize the kinetic matrix and compare with n^2 pi^2 / (2 L^2).
numerical = np.linalg.eigvalsh(basis.kinetic)
analytic = basis.kinetic_eigenvalues()
rel = np.abs(numerical - analytic) / analytic
print(f"largest relative deviation, upper half of the spectrum: {rel[90:].max():.1e}")
print(f"lowest eigenvalue {numerical[0]:.12f} vs {analytic[0]:.12f}")

# %%
# The quadrature is the trapezoid-like sum over nodes with equal weights.
# A normalized Gaussian integrates to one to machine precision.
g = np.exp(-basis.nodes**2) / np.sqrt(np.pi)
print(f"integral of a unit Gaussian: {np.sum(basis.weights * g):.15f}")

# %%
# The helium nucleus is a soft-Coulomb well of charge 2.
v = soft_coulomb_potential(basis)
print(f"V at the node closest to the origin: {v.values[90]:.6f} (x = {basis.nodes[90]:+.3f})")
