"""MCTDHF equations of motion in a sine-DVR grid basis.

Orbitals are stored as an ``(M, N_b)`` complex array ``b`` of DVR
coefficients; since the DVR overlap is the identity, orthonormal orbitals
have orthonormal rows.  Grid values follow from ``phi(x_l) = b_l / sqrt(w_l)``.

The combined state evolves as

    i d/dt b_n = P [ h b_n + sum_pqrs (D^-1)_np d_pqrs g_rs b_q ]
    i d/dt C   = H_CI C

with ``P`` the projector onto the orthogonal complement of the orbital span.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .dvr import InteractionKernel, Potential1D, SineDvrBasis
from .fock import DeterminantBasis, make_determinant_basis

Mode = Literal["real", "imaginary"]

DEFAULT_EPSILON = 1e-8


class SingularDensityWarning(RuntimeWarning):
    """The smallest natural occupation is close to the regularization scale."""


@dataclass(frozen=True)
class FieldPulse:
    """Rectangular uniform field, ``amplitude`` on ``[t_start, t_start + duration]``."""

    amplitude: float = 0.0
    t_start: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"pulse duration must be non-negative, got {self.duration}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    def __call__(self, t: float) -> float:
        if self.duration > 0 and self.t_start <= t <= self.t_end:
            return self.amplitude
        return 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return (self.t_start, self.t_end) if self.duration > 0 and self.amplitude != 0 else ()


@dataclass
class WaveState:
    """Orbital coefficients ``(M, N_b)``, CI vector and time."""

    orbitals: np.ndarray
    ci: np.ndarray
    time: float = 0.0

    @property
    def n_orbitals(self) -> int:
        return self.orbitals.shape[0]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.orbitals.ravel(), self.ci])

    @classmethod
    def unpack(cls, vec: np.ndarray, n_orbitals: int, n_points: int, time: float = 0.0) -> WaveState:
        nb = n_orbitals * n_points
        return cls(vec[:nb].reshape(n_orbitals, n_points), vec[nb:], time)

    def copy(self) -> WaveState:
        return WaveState(self.orbitals.copy(), self.ci.copy(), self.time)


@dataclass(frozen=True)
class DensityMatrices:
    one_body: np.ndarray
    two_body: np.ndarray

    def natural_occupations(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.one_body + self.one_body.conj().T))[::-1]


@dataclass(frozen=True)
class Integrals:
    one_body: np.ndarray
    two_body: np.ndarray
    mean_fields: np.ndarray
    # h applied to each orbital row, reused by the orbital equation
    h_orbitals: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class SystemContext:
    """Everything time-independent the equations of motion need."""

    basis: SineDvrBasis
    potential: Potential1D
    kernel: InteractionKernel
    determinants: DeterminantBasis
    epsilon: float = DEFAULT_EPSILON
    pulse: FieldPulse = field(default_factory=FieldPulse)

    @property
    def n_orbitals(self) -> int:
        return self.determinants.n_spatial_orbitals

    @property
    def n_particles(self) -> int:
        return self.determinants.n_particles


def make_context(
    basis: SineDvrBasis,
    potential: Potential1D,
    kernel: InteractionKernel,
    n_orbitals: int,
    n_particles: int = 2,
    sz: float = 0.0,
    **kwargs,
) -> SystemContext:
    if n_orbitals > basis.n_points:
        raise ValueError(f"M={n_orbitals} exceeds the basis size {basis.n_points}")
    dets = make_determinant_basis(n_orbitals, n_particles, sz)
    return SystemContext(basis, potential, kernel, dets, **kwargs)


def _real_matmul(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # complex @ real without promoting the real operand to complex
    if np.iscomplexobj(a):
        k = a.shape[0]
        stacked = np.concatenate([a.real, a.imag]) @ w
        return stacked[:k] + 1j * stacked[k:]
    return a @ w


def apply_one_body(
    orbitals: np.ndarray, basis: SineDvrBasis, potential: Potential1D, field: float = 0.0
) -> np.ndarray:
    """``h b_n`` for every orbital row, with ``h = T + V - field * x``."""
    diag = potential.values - field * basis.nodes
    return _real_matmul(orbitals, basis.kinetic) + diag * orbitals


def one_body_integrals(
    orbitals: np.ndarray, basis: SineDvrBasis, potential: Potential1D, field: float = 0.0
) -> np.ndarray:
    """``h_pq = <phi_p| T + V - field x |phi_q>``."""
    if orbitals.shape[-1] != basis.n_points:
        raise ValueError(f"orbitals have {orbitals.shape[-1]} coefficients, basis has {basis.n_points}")
    return orbitals.conj() @ apply_one_body(orbitals, basis, potential, field).T


def position_matrix(orbitals: np.ndarray, basis: SineDvrBasis) -> np.ndarray:
    return (orbitals.conj() * basis.nodes) @ orbitals.T


def _pair_densities(orbitals: np.ndarray) -> np.ndarray:
    m, nb = orbitals.shape
    return (orbitals.conj()[:, None, :] * orbitals[None, :, :]).reshape(m * m, nb)


def mean_fields(orbitals: np.ndarray, kernel: InteractionKernel) -> np.ndarray:
    """``g_rs(x_i) = sum_j W_ij conj(b_rj) b_sj`` as an ``(M, M, N_b)`` array."""
    m, nb = orbitals.shape
    # W is symmetric, so right-multiplying pair densities contracts the right index
    return _real_matmul(_pair_densities(orbitals), kernel.values).reshape(m, m, nb)


def two_body_integrals(
    orbitals: np.ndarray, kernel: InteractionKernel, fields: np.ndarray | None = None
) -> np.ndarray:
    """``g_pqrs = sum_ij conj(b_pi) b_qi W_ij conj(b_rj) b_sj`` via the mean fields."""
    m, nb = orbitals.shape
    if fields is None:
        fields = mean_fields(orbitals, kernel)
    g = _pair_densities(orbitals) @ fields.reshape(m * m, nb).T
    return g.reshape(m, m, m, m)


def integrals(
    orbitals: np.ndarray, ctx: SystemContext, field: float = 0.0
) -> Integrals:
    mf = mean_fields(orbitals, ctx.kernel)
    hb = apply_one_body(orbitals, ctx.basis, ctx.potential, field)
    h = orbitals.conj() @ hb.T
    return Integrals(h, two_body_integrals(orbitals, ctx.kernel, mf), mf, hb)


def density_matrices(ci: np.ndarray, dets: DeterminantBasis) -> DensityMatrices:
    """``D_pq = <Psi|E_pq|Psi>`` and ``d_pqrs = <Psi|e_pqrs|Psi>``."""
    if ci.shape != (dets.size,):
        raise ValueError(f"CI vector has shape {ci.shape}, determinant basis has {dets.size}")
    d1, d2 = dets.transition_densities(ci, ci)
    return DensityMatrices(d1, d2)


def regularized_inverse(d: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Inverse of ``D + epsilon * exp(-D / epsilon)`` taken in the eigenbasis of ``D``."""
    d = np.asarray(d)
    scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
    if np.max(np.abs(d - d.conj().T), initial=0.0) > 1e-10 * scale:
        raise ValueError("density matrix is not Hermitian")
    lam, u = np.linalg.eigh(0.5 * (d + d.conj().T))
    lam_pos = np.clip(lam, 0.0, None)
    reg = lam + epsilon * np.exp(-lam_pos / epsilon)
    return (u / reg) @ u.conj().T


def project_complement(orbitals: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Remove from each row of ``vectors`` its component in the orbital span."""
    return vectors - (vectors @ orbitals.conj().T) @ orbitals


def ci_hamiltonian(dets: DeterminantBasis, h: np.ndarray, g: np.ndarray) -> sp.csr_matrix:
    """Sparse CI Hamiltonian assembled from the coupling tables (Slater-Condon)."""
    return dets.hamiltonian(h, g)


def energy_from_densities(h: np.ndarray, g: np.ndarray, dens: DensityMatrices) -> float:
    e = np.sum(h * dens.one_body) + 0.5 * np.sum(g * dens.two_body)
    return float(e.real)


def orbital_rhs(
    orbitals: np.ndarray,
    ctx: SystemContext,
    ints: Integrals,
    dens: DensityMatrices,
    field: float = 0.0,
) -> np.ndarray:
    """Bracketed orbital generator ``P [h b_n + sum (D^-1 d) g b]`` (no ``-i``)."""
    m, nb = orbitals.shape
    occ = np.linalg.eigvalsh(0.5 * (dens.one_body + dens.one_body.conj().T))
    if occ[0] < 10 * ctx.epsilon and m < nb:
        warnings.warn(
            "smallest natural occupation is below 10*epsilon; "
            "the orbital space may be over-complete for this state",
            SingularDensityWarning,
            stacklevel=3,
        )
    dinv = regularized_inverse(dens.one_body, ctx.epsilon)
    x = np.tensordot(dinv, dens.two_body, axes=(1, 0))  # (n, q, r, s)
    y = x.reshape(m * m, m * m) @ ints.mean_fields.reshape(m * m, nb)
    mf_term = np.einsum("nqi,qi->ni", y.reshape(m, m, nb), orbitals)
    hb = ints.h_orbitals
    if hb is None:
        hb = apply_one_body(orbitals, ctx.basis, ctx.potential, field)
    return project_complement(orbitals, hb + mf_term)


def rhs(
    state: WaveState,
    ctx: SystemContext,
    mode: Mode = "real",
    field: float | None = None,
    energy_shift: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(d b/dt, d C/dt)`` of the combined MCTDHF state.

    In ``"imaginary"`` mode the derivative is taken with respect to
    ``tau = i t`` and the external field is ignored.  ``field`` overrides the
    pulse value at ``state.time``.  ``energy_shift`` is subtracted from the CI
    Hamiltonian; it only changes the global phase of the wavefunction.
    """
    if mode == "imaginary":
        fval = 0.0
    else:
        fval = ctx.pulse(state.time) if field is None else field
    b, c = state.orbitals, state.ci
    ints = integrals(b, ctx, fval)
    dens = density_matrices(c, ctx.determinants)
    gen_b = orbital_rhs(b, ctx, ints, dens, fval)
    gen_c = ci_hamiltonian(ctx.determinants, ints.one_body, ints.two_body) @ c
    if energy_shift:
        gen_c = gen_c - energy_shift * c
    if mode == "imaginary":
        return -gen_b, -gen_c
    if mode != "real":
        raise ValueError(f"unknown mode {mode!r}")
    return -1j * gen_b, -1j * gen_c


def state_energy(state: WaveState, ctx: SystemContext, field: float = 0.0) -> float:
    """``<Psi|H|Psi>`` divided by the CI norm."""
    ints = integrals(state.orbitals, ctx, field)
    dens = density_matrices(state.ci, ctx.determinants)
    return energy_from_densities(ints.one_body, ints.two_body, dens) / float(np.vdot(state.ci, state.ci).real)
