"""Structural invariant suite on a tiny grid.

Each check returns a :class:`CheckResult` carrying the measured defect and
the bound it must stay under.  The whole suite runs in well under a second
and backs the ``check`` subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dvr import build_sine_dvr, soft_coulomb_interaction, soft_coulomb_potential
from .fock import make_determinant_basis
from .mctdhf import (
    SystemContext,
    WaveState,
    density_matrices,
    make_context,
    project_complement,
    rhs,
    state_energy,
)
from .propagate import lowdin_orthonormalize


@dataclass(frozen=True)
class CheckResult:
    name: str
    defect: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.defect) and self.defect <= self.bound)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34s} defect={self.defect:.3e}  bound={self.bound:.1e}"


def _tiny_context(n_points: int = 12, n_orbitals: int = 3) -> SystemContext:
    basis = build_sine_dvr(-6.0, 6.0, n_points)
    return make_context(
        basis, soft_coulomb_potential(basis), soft_coulomb_interaction(basis), n_orbitals
    )


def _generic_state(ctx: SystemContext, seed: int = 7) -> WaveState:
    # fixed seed: the suite is deterministic
    rng = np.random.default_rng(seed)
    m, nb = ctx.n_orbitals, ctx.basis.n_points
    b = rng.normal(size=(m, nb)) + 1j * rng.normal(size=(m, nb))
    c = rng.normal(size=ctx.determinants.size) + 1j * rng.normal(size=ctx.determinants.size)
    return WaveState(lowdin_orthonormalize(b), c / np.linalg.norm(c))


def check_kinetic_spectrum(n_points: int = 40, length: float = 17.0) -> CheckResult:
    basis = build_sine_dvr(0.0, length, n_points)
    n = np.arange(1, n_points + 1)
    exact = n**2 * np.pi**2 / (2 * length**2)
    err = np.max(np.abs(np.linalg.eigvalsh(basis.kinetic) - exact) / exact)
    return CheckResult("kinetic eigenvalues exact", float(err), 1e-12)


def check_projector(ctx: SystemContext, state: WaveState) -> list[CheckResult]:
    b = state.orbitals
    rng = np.random.default_rng(3)
    v = rng.normal(size=(5, b.shape[1])) + 1j * rng.normal(size=(5, b.shape[1]))
    pv = project_complement(b, v)
    idem = np.max(np.abs(project_complement(b, pv) - pv))
    kill = np.max(np.abs(project_complement(b, b)))
    return [
        CheckResult("projector idempotent", float(idem), 1e-12),
        CheckResult("projector annihilates orbitals", float(kill), 1e-12),
    ]


def check_gauge(ctx: SystemContext, state: WaveState) -> CheckResult:
    db, _ = rhs(state, ctx, "real", field=0.05)
    overlap = state.orbitals.conj() @ db.T
    return CheckResult("gauge <phi_k|dphi_l/dt> = 0", float(np.max(np.abs(overlap))), 1e-10)


def check_density_identities(ctx: SystemContext, state: WaveState) -> list[CheckResult]:
    n = ctx.n_particles
    dens = density_matrices(state.ci, ctx.determinants)
    d1, d2 = dens.one_body, dens.two_body
    herm1 = np.max(np.abs(d1 - d1.conj().T))
    # d_pqrs = conj(d_qpsr) and d_pqrs = d_rspq
    herm2 = max(
        np.max(np.abs(d2 - d2.transpose(1, 0, 3, 2).conj())),
        np.max(np.abs(d2 - d2.transpose(2, 3, 0, 1))),
    )
    tr1 = abs(np.trace(d1) - n)
    tr2 = abs(np.einsum("pprr->", d2) - n * (n - 1))
    partial = np.max(np.abs(np.einsum("pqrr->pq", d2) - (n - 1) * d1))
    return [
        CheckResult("D Hermitian", float(herm1), 1e-13),
        CheckResult("d Hermitian and pair-symmetric", float(herm2), 1e-13),
        CheckResult("tr D = N", float(tr1), 1e-12),
        CheckResult("tr d = N(N-1)", float(tr2), 1e-12),
        CheckResult("sum_r d_pqrr = (N-1) D_pq", float(partial), 1e-12),
    ]


def check_unitary_mixing(ctx: SystemContext, state: WaveState) -> CheckResult:
    """Rotating the orbitals and counter-rotating C leaves the energy unchanged (N=2, Sz=0)."""
    m = ctx.n_orbitals
    rng = np.random.default_rng(11)
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    u, _ = np.linalg.qr(a)
    # determinant index i*M + j holds alpha orbital i, beta orbital j
    cmat = state.ci.reshape(m, m)
    rotated = WaveState(u @ state.orbitals, (u.conj() @ cmat @ u.conj().T).ravel())
    diff = abs(state_energy(rotated, ctx, 0.02) - state_energy(state, ctx, 0.02))
    return CheckResult("energy invariant under orbital mixing", float(diff), 1e-11)


def check_commutators(n_orbitals: int = 3, n_particles: int = 2) -> CheckResult:
    """``[E_pq, E_rs] = delta_qr E_ps - delta_ps E_rq`` on the determinant space."""
    dets = make_determinant_basis(n_orbitals, n_particles)
    m = n_orbitals
    e = {(p, q): dets.one_body_matrix(p, q) for p in range(m) for q in range(m)}
    worst = 0.0
    for p in range(m):
        for q in range(m):
            for r in range(m):
                for s in range(m):
                    lhs = e[p, q] @ e[r, s] - e[r, s] @ e[p, q]
                    rhs_ = (q == r) * e[p, s] - (p == s) * e[r, q]
                    worst = max(worst, float(np.max(np.abs(lhs - rhs_))))
    return CheckResult(f"excitation commutators (M={m})", worst, 1e-14)


def run_invariant_suite() -> list[CheckResult]:
    ctx = _tiny_context()
    state = _generic_state(ctx)
    results = [check_kinetic_spectrum()]
    results += check_projector(ctx, state)
    results.append(check_gauge(ctx, state))
    results += check_density_identities(ctx, state)
    results.append(check_unitary_mixing(ctx, state))
    for m in (1, 2, 3):
        results.append(check_commutators(m))
    return results
