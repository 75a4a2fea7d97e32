"""Exact two-electron solver on the tensor-product sine-DVR grid.

Two electrons in one dimension are equivalent to a single particle in the
plane with potential ``V(x) + V(y) + W(x, y)``.  The wavefunction is held as
an ``(N_b, N_b)`` array of DVR coefficients ``c_ij`` with ``sum |c_ij|^2 = 1``;
grid values are ``psi(x_i, y_j) = c_ij / sqrt(w_i w_j)``.  The Hamiltonian is
applied matrix-free as ``T c + c T + V2 * c``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Mapping

import numpy as np
import scipy.sparse.linalg as sla

from .dvr import InteractionKernel, Potential1D, SineDvrBasis
from .mctdhf import FieldPulse, _real_matmul
from .propagate import (
    ACCEPTANCE_CONFIG,
    EXPLORATORY_CONFIG,
    AdaptiveStepper,
    ConvergenceError,
    IntegratorConfig,
    NumericalAbort,
    drive_realtime,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Grid2D:
    basis: SineDvrBasis
    potential2d: np.ndarray
    potential: Potential1D | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.potential2d.shape


@dataclass
class Psi2D:
    values: np.ndarray
    time: float = 0.0

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def make_grid_2d(basis: SineDvrBasis, potential: Potential1D, kernel: InteractionKernel | None) -> Grid2D:
    """``V(x_i) + V(x_j) + W(x_i, x_j)``; pass ``kernel=None`` for noninteracting electrons."""
    v = potential.values
    v2 = v[:, None] + v[None, :]
    if kernel is not None:
        v2 = v2 + kernel.values
    v2 = np.ascontiguousarray(v2)
    v2.setflags(write=False)
    return Grid2D(basis, v2, potential)


class Hamiltonian2D:
    """Matrix-free ``H = T x 1 + 1 x T + V2 - field * (x + y)``."""

    def __init__(self, grid: Grid2D):
        self.grid = grid
        self.kinetic = grid.basis.kinetic
        x = grid.basis.nodes
        self.dipole_diag = x[:, None] + x[None, :]

    @property
    def n_points(self) -> int:
        return self.grid.basis.n_points

    def apply(self, c: np.ndarray, field: float = 0.0) -> np.ndarray:
        t = self.kinetic
        out = _real_matmul(c, t)
        out += _real_matmul(c.T, t).T
        diag = self.grid.potential2d if not field else self.grid.potential2d - field * self.dipole_diag
        out += diag * c
        return out

    __call__ = apply

    def spectral_radius_bound(self) -> float:
        kin = self.grid.basis.kinetic_eigenvalues()[-1]
        return float(2 * kin + np.max(np.abs(self.grid.potential2d)))

    def as_linear_operator(self, dtype=float) -> sla.LinearOperator:
        n = self.n_points
        return sla.LinearOperator(
            (n * n, n * n), matvec=lambda v: self.apply(v.reshape(n, n)).ravel(), dtype=dtype
        )

    def dense(self) -> np.ndarray:
        """Explicit ``(N_b^2, N_b^2)`` matrix; only for tiny grids."""
        n = self.n_points
        eye = np.eye(n)
        return (
            np.kron(self.kinetic, eye)
            + np.kron(eye, self.kinetic)
            + np.diag(self.grid.potential2d.ravel())
        )


def build_hamiltonian_2d(
    basis: SineDvrBasis, potential: Potential1D, kernel: InteractionKernel | None
) -> Hamiltonian2D:
    return Hamiltonian2D(make_grid_2d(basis, potential, kernel))


def energy_2d(ham: Hamiltonian2D, c: np.ndarray) -> float:
    return float(np.vdot(c, ham.apply(c)).real / np.vdot(c, c).real)


def dipole_2d(psi: Psi2D | np.ndarray, basis: SineDvrBasis) -> float:
    """``<x + y>``."""
    c = psi.values if isinstance(psi, Psi2D) else psi
    p = np.abs(c) ** 2
    x = basis.nodes
    return float((p.sum(axis=1) @ x + p.sum(axis=0) @ x) / p.sum())


def density_2d(psi: Psi2D | np.ndarray, basis: SineDvrBasis) -> np.ndarray:
    """Continuum-normalized ``|psi(x_i, y_j)|^2``; integrates to one on the grid."""
    c = psi.values if isinstance(psi, Psi2D) else psi
    w = basis.weights
    return np.abs(c) ** 2 / np.outer(w, w)


def product_guess(ham: Hamiltonian2D) -> np.ndarray:
    """Both electrons in the lowest orbital of the noninteracting problem."""
    basis = ham.grid.basis
    v = ham.grid.potential.values if ham.grid.potential is not None else np.zeros(basis.n_points)
    _, vecs = np.linalg.eigh(basis.kinetic + np.diag(v))
    phi = vecs[:, 0]
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return np.outer(phi, phi)


def groundstate_2d(
    ham: Hamiltonian2D,
    tol: float = 1e-10,
    initial: np.ndarray | None = None,
    method: Literal["itp", "eigsh"] = "itp",
    config: IntegratorConfig = EXPLORATORY_CONFIG,
    max_steps: int = 200_000,
    tol_residual: float | None = None,
) -> tuple[float, Psi2D]:
    """Lowest eigenpair of the two-electron Hamiltonian.

    The default path is imaginary-time propagation with renormalization after
    every step, converged when the energy changes by less than ``tol``
    between steps.  ``method="eigsh"`` uses Lanczos on the same matrix-free
    action as an independent check.
    """
    n = ham.n_points
    if method == "eigsh":
        v0 = None if initial is None else np.real(initial).ravel()
        vals, vecs = sla.eigsh(ham.as_linear_operator(), k=1, which="SA", tol=min(tol, 1e-12), v0=v0)
        c = vecs[:, 0].reshape(n, n)
        c = 0.5 * (c + c.T)
        c /= np.linalg.norm(c)
        if c.sum() < 0:
            c = -c
        return float(vals[0]), Psi2D(c.astype(complex))
    if method != "itp":
        raise ValueError(f"unknown method {method!r}")

    c = np.array(product_guess(ham) if initial is None else initial)
    if np.iscomplexobj(c):
        c = c.real
    c /= np.linalg.norm(c)
    dt_cap = min(config.dt_max, 2.0 / ham.spectral_radius_bound())
    cfg = IntegratorConfig(config.method, min(config.dt_initial, dt_cap), config.abs_tol, config.rel_tol, dt_cap)
    stepper = AdaptiveStepper(lambda t, y: -ham.apply(y.reshape(n, n)).ravel(), cfg)
    e_prev = energy_2d(ham, c)
    y = c.ravel()
    for it in range(1, max_steps + 1):
        stepper.reset()
        _, y = stepper.step(0.0, y)
        if not np.all(np.isfinite(y)):
            raise NumericalAbort(f"non-finite wavefunction at imaginary-time step {it}")
        y /= np.linalg.norm(y)
        hy = ham.apply(y.reshape(n, n)).ravel()
        e = float(np.dot(y, hy))
        if abs(e - e_prev) < tol:
            if tol_residual is None or np.linalg.norm(hy - e * y) < tol_residual:
                logger.info("2D ground state converged after %d steps: E=%.12f", it, e)
                return e, Psi2D(y.reshape(n, n).astype(complex))
        e_prev = e
    raise ConvergenceError(f"2D imaginary-time relaxation did not converge in {max_steps} steps")


def _sector_lowest(ham: Hamiltonian2D, parity: int, tol: float) -> float:
    """Lowest eigenvalue among exchange-symmetric states of the given inversion parity."""
    n = ham.n_points

    def project(c: np.ndarray) -> np.ndarray:
        c = 0.5 * (c + c.T)
        return 0.5 * (c + parity * c[::-1, ::-1])

    def matvec(v: np.ndarray) -> np.ndarray:
        c = project(v.reshape(n, n))
        return project(ham.apply(c)).ravel()

    op = sla.LinearOperator((n * n, n * n), matvec=matvec, dtype=float)
    rng = np.random.default_rng(0)
    v0 = project(product_guess(ham) + 1e-3 * rng.normal(size=(n, n))).ravel()
    # the projected-out complement sits at eigenvalue 0, above every bound state
    vals = sla.eigsh(op, k=1, which="SA", tol=tol, v0=v0, return_eigenvectors=False)
    return float(vals[0])


def dipole_excitation_2d(ham: Hamiltonian2D, tol: float = 1e-12) -> float:
    """Energy of the lowest dipole-allowed transition out of the ground state.

    The dipole operator ``x + y`` connects the even singlet ground state only
    to exchange-symmetric states of odd parity, so the transition energy is
    the gap between the lowest eigenvalues of those two sectors.  This is the
    position of the first line in a weak-kick dipole spectrum.  Needs a box
    symmetric about the origin.
    """
    basis = ham.grid.basis
    if not np.allclose(basis.nodes, -basis.nodes[::-1], atol=1e-12 * max(1.0, basis.x_max)):
        raise ValueError("parity sectors need a box symmetric about x = 0")
    return _sector_lowest(ham, -1, tol) - _sector_lowest(ham, +1, tol)


Observer2D = Callable[[Psi2D, SineDvrBasis], float]


@dataclass
class Trajectory2D:
    psi: Psi2D
    times: np.ndarray
    records: dict[str, np.ndarray]
    n_steps: int = 0


def propagate_2d(
    psi: Psi2D,
    t_final: float,
    ham: Hamiltonian2D,
    pulse: FieldPulse = FieldPulse(),
    observers: Mapping[str, Observer2D] | None = None,
    config: IntegratorConfig = ACCEPTANCE_CONFIG,
    stride: float = 0.1,
    energy_reference: float | None = None,
) -> Trajectory2D:
    """Real-time evolution under ``H - field(t) (x + y)``.

    By default records ``<x + y>`` as ``"dipole"``.  As in the MCTDHF driver
    the equation is integrated in a frame rotating with the initial energy
    and observers see the lab-frame wavefunction.
    """
    n = ham.n_points
    basis = ham.grid.basis
    observers = dict(observers) if observers is not None else {"dipole": dipole_2d}
    t0 = psi.time
    c0 = np.asarray(psi.values, dtype=complex)
    shift = energy_2d(ham, c0) if energy_reference is None else energy_reference

    def lab(y: np.ndarray, t: float) -> Psi2D:
        c = y.reshape(n, n)
        if shift:
            c = c * np.exp(-1j * shift * (t - t0))
        return Psi2D(c, t)

    def make_rhs(field: float):
        def f(t: float, y: np.ndarray) -> np.ndarray:
            c = y.reshape(n, n)
            hc = ham.apply(c, field)
            if shift:
                hc -= shift * c
            return (-1j * hc).ravel()

        return f

    times: list[float] = []
    records: dict[str, list[float]] = {k: [] for k in observers}

    def sample(t: float, y: np.ndarray) -> None:
        p = lab(y, t)
        times.append(t)
        for k, obs in observers.items():
            records[k].append(obs(p, basis))

    try:
        y, n_steps = drive_realtime(make_rhs, c0.ravel().copy(), t0, t_final, pulse, config, stride, sample)
    except NumericalAbort as exc:
        raise NumericalAbort(str(exc), lab(exc.last_state, times[-1] if times else t0)) from None
    return Trajectory2D(lab(y, t_final), np.array(times), {k: np.array(v) for k, v in records.items()}, n_steps)


def embed_in_larger_box(psi: Psi2D, small: SineDvrBasis, large: SineDvrBasis) -> Psi2D:
    """Copy a wavefunction onto a larger grid whose nodes contain the small grid's nodes."""
    offset = np.searchsorted(large.nodes, small.nodes[0] - 1e-9 * large.spacing)
    if not np.allclose(large.nodes[offset : offset + small.n_points], small.nodes, atol=1e-9 * large.spacing):
        raise ValueError("grids are not nested: node positions differ")
    out = np.zeros((large.n_points, large.n_points), dtype=complex)
    sl = slice(offset, offset + small.n_points)
    out[sl, sl] = psi.values
    return Psi2D(out, psi.time)
