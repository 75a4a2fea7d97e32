"""MCTDHF and exact two-electron grid solvers for the 1D soft-Coulomb helium model."""

from __future__ import annotations

from .dvr import (
    InteractionKernel,
    InvalidDomainError,
    Potential1D,
    SineDvrBasis,
    build_sine_dvr,
    soft_coulomb_interaction,
    soft_coulomb_potential,
)
from .fock import DeterminantBasis, InfeasibleSpaceError, make_determinant_basis
from .mctdhf import (
    FieldPulse,
    SingularDensityWarning,
    SystemContext,
    WaveState,
    density_matrices,
    make_context,
    rhs,
    state_energy,
)
from .observables import (
    DipoleTrajectory,
    SpectrumResult,
    dipole_expectation,
    dipole_spectrum,
    total_energy,
    two_particle_density,
)
from .propagate import (
    ACCEPTANCE_CONFIG,
    EXPLORATORY_CONFIG,
    ConvergenceError,
    IntegratorConfig,
    NumericalAbort,
    initial_guess,
    load_checkpoint,
    propagate_realtime,
    relax_to_groundstate,
    save_checkpoint,
)
from .tdse import (
    Hamiltonian2D,
    Psi2D,
    build_hamiltonian_2d,
    density_2d,
    dipole_2d,
    groundstate_2d,
    propagate_2d,
)

__version__ = "0.1.0"

__all__ = [
    "ACCEPTANCE_CONFIG",
    "EXPLORATORY_CONFIG",
    "ConvergenceError",
    "DeterminantBasis",
    "DipoleTrajectory",
    "FieldPulse",
    "Hamiltonian2D",
    "InfeasibleSpaceError",
    "IntegratorConfig",
    "InteractionKernel",
    "InvalidDomainError",
    "NumericalAbort",
    "Potential1D",
    "Psi2D",
    "SineDvrBasis",
    "SingularDensityWarning",
    "SpectrumResult",
    "SystemContext",
    "WaveState",
    "build_hamiltonian_2d",
    "build_sine_dvr",
    "density_2d",
    "density_matrices",
    "dipole_2d",
    "dipole_expectation",
    "dipole_spectrum",
    "groundstate_2d",
    "initial_guess",
    "load_checkpoint",
    "make_context",
    "make_determinant_basis",
    "propagate_2d",
    "propagate_realtime",
    "relax_to_groundstate",
    "rhs",
    "save_checkpoint",
    "soft_coulomb_interaction",
    "soft_coulomb_potential",
    "state_energy",
    "total_energy",
    "two_particle_density",
]
