"""Sine discrete variable representation on a finite interval.

The basis functions are the particle-in-a-box eigenfunctions rotated so that
each one is localized at a single equidistant node, ``chi_i(x_k) = delta_ik /
sqrt(w_k)``.  Spatial operators are therefore diagonal and only the kinetic
energy needs a full matrix, which is known in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class InvalidDomainError(ValueError):
    """Raised for an empty interval or too few grid points."""


@dataclass(frozen=True)
class SineDvrBasis:
    """Grid, quadrature weights and kinetic matrix of a sine DVR."""

    x_min: float
    x_max: float
    n_points: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    kinetic: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def spacing(self) -> float:
        return self.length / (self.n_points + 1)

    def kinetic_eigenvalues(self) -> np.ndarray:
        """Exact spectrum ``n^2 pi^2 / (2 L^2)`` the kinetic matrix must reproduce."""
        n = np.arange(1, self.n_points + 1)
        return n**2 * np.pi**2 / (2.0 * self.length**2)


@dataclass(frozen=True)
class Potential1D:
    values: np.ndarray


@dataclass(frozen=True)
class InteractionKernel:
    values: np.ndarray


def sine_dvr_kinetic(length: float, n_points: int) -> np.ndarray:
    """Colbert-Miller kinetic matrix for ``n_points`` interior nodes of a box.

    Returns the ``(n, n)`` matrix of ``-1/2 d^2/dx^2`` in the sine DVR; its
    eigenvalues are the particle-in-a-box levels.
    """
    n1 = n_points + 1
    i = np.arange(1, n_points + 1)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    offdiag = ii != jj
    t = np.empty((n_points, n_points))
    d = ii[offdiag] - jj[offdiag]
    s = ii[offdiag] + jj[offdiag]
    t[offdiag] = 0.5 * (
        1.0 / np.sin(np.pi * d / (2 * n1)) ** 2 - 1.0 / np.sin(np.pi * s / (2 * n1)) ** 2
    )
    t[np.diag_indices(n_points)] = 0.5 * ((2 * n1**2 + 1) / 3.0 - 1.0 / np.sin(np.pi * i / n1) ** 2)
    sign = np.where((ii - jj) % 2 == 0, 1.0, -1.0)
    t *= sign * np.pi**2 / (2.0 * length**2)
    # exact symmetrization; the two triangles differ only in roundoff
    return 0.5 * (t + t.T)


def build_sine_dvr(x_min: float, x_max: float, n_points: int) -> SineDvrBasis:
    """Construct the sine DVR with ``n_points`` nodes strictly inside ``(x_min, x_max)``."""
    if not x_max > x_min:
        raise InvalidDomainError(f"x_max ({x_max}) must exceed x_min ({x_min})")
    if n_points < 2:
        raise InvalidDomainError(f"need at least 2 grid points, got {n_points}")
    length = x_max - x_min
    dx = length / (n_points + 1)
    nodes = x_min + dx * np.arange(1, n_points + 1)
    weights = np.full(n_points, dx)
    kinetic = sine_dvr_kinetic(length, n_points)
    for arr in (nodes, weights, kinetic):
        arr.setflags(write=False)
    return SineDvrBasis(float(x_min), float(x_max), int(n_points), nodes, weights, kinetic)


def soft_coulomb_potential(basis: SineDvrBasis, charge: float = 2.0) -> Potential1D:
    """Softened nuclear attraction ``-charge / sqrt(x^2 + 1)`` sampled on the nodes."""
    if charge <= 0:
        raise ValueError(f"charge must be positive, got {charge}")
    values = -charge / np.sqrt(basis.nodes**2 + 1.0)
    values.setflags(write=False)
    return Potential1D(values)


def soft_coulomb_interaction(basis: SineDvrBasis) -> InteractionKernel:
    """Softened electron repulsion ``1 / sqrt((x_i - x_j)^2 + 1)`` on all node pairs."""
    x = basis.nodes
    values = 1.0 / np.sqrt((x[:, None] - x[None, :]) ** 2 + 1.0)
    values.setflags(write=False)
    return InteractionKernel(values)


def diagonal_matrix_element(
    basis: SineDvrBasis, f: Callable[[np.ndarray], np.ndarray], p: int, q: int
) -> float:
    """``<chi_p| f(x) |chi_q> = f(x_q) delta_pq`` (0-based indices)."""
    n = basis.n_points
    if not (0 <= p < n and 0 <= q < n):
        raise IndexError(f"indices ({p}, {q}) outside basis of size {n}")
    if p != q:
        return 0.0
    return float(f(basis.nodes[q]))


def quadrature(basis: SineDvrBasis, values: np.ndarray) -> float:
    """Integrate a function sampled on the nodes."""
    return float(np.dot(basis.weights, values))
