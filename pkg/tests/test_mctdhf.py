from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_two_electron_hamiltonian, random_state, tiny_system
from mctdhf1d.dvr import build_sine_dvr, soft_coulomb_interaction, soft_coulomb_potential
from mctdhf1d.mctdhf import (
    FieldPulse,
    SingularDensityWarning,
    WaveState,
    density_matrices,
    energy_from_densities,
    integrals,
    make_context,
    mean_fields,
    one_body_integrals,
    position_matrix,
    project_complement,
    regularized_inverse,
    rhs,
    state_energy,
    two_body_integrals,
)
from mctdhf1d.propagate import initial_guess, lowdin_orthonormalize, relax_to_groundstate


def random_orbitals(m, nb, seed):
    rng = np.random.default_rng(seed)
    return lowdin_orthonormalize(rng.normal(size=(m, nb)) + 1j * rng.normal(size=(m, nb)))


# ---------------------------------------------------------------------------
# pulse and state containers


def test_field_pulse_rectangular():
    p = FieldPulse(0.01, 1.0, 0.5)
    assert p(0.99) == 0.0 and p(1.0) == 0.01 and p(1.25) == 0.01 and p(1.5) == 0.01 and p(1.51) == 0.0
    assert p.breakpoints() == (1.0, 1.5)
    assert FieldPulse()(0.0) == 0.0
    with pytest.raises(ValueError):
        FieldPulse(0.01, 0.0, -1.0)


def test_pack_unpack_roundtrip():
    ctx = tiny_system(8, 2)
    s = random_state(ctx, 1)
    back = WaveState.unpack(s.pack(), 2, 8, s.time)
    assert np.array_equal(back.orbitals, s.orbitals) and np.array_equal(back.ci, s.ci)


def test_make_context_rejects_too_many_orbitals():
    b = build_sine_dvr(-1, 1, 3)
    with pytest.raises(ValueError):
        make_context(b, soft_coulomb_potential(b), soft_coulomb_interaction(b), 4)


# ---------------------------------------------------------------------------
# integrals


def test_h_of_lowest_one_body_eigenvector_is_its_eigenvalue():
    ctx = tiny_system(30, 1, (-10.0, 10.0))
    h = ctx.basis.kinetic + np.diag(ctx.potential.values)
    lam, v = np.linalg.eigh(h)
    b = v[:, :1].T.astype(complex)
    assert one_body_integrals(b, ctx.basis, ctx.potential)[0, 0] == pytest.approx(lam[0], abs=1e-13)


def test_field_shifts_h_by_dipole_matrix():
    ctx = tiny_system(12, 3)
    b = random_orbitals(3, 12, 4)
    e = 0.37
    diff = one_body_integrals(b, ctx.basis, ctx.potential, e) - one_body_integrals(b, ctx.basis, ctx.potential)
    assert np.allclose(diff, -e * position_matrix(b, ctx.basis), atol=1e-13)


def test_h_matches_grid_quadrature_oracle():
    ctx = tiny_system(15, 2)
    basis = ctx.basis
    b = random_orbitals(2, 15, 5)
    phi = b / np.sqrt(basis.weights)
    # T acts on coefficients; on grid values it is w^-1/2 T w^1/2
    sw = np.sqrt(basis.weights)
    t_grid = basis.kinetic / sw[:, None] * sw[None, :]
    field = 0.2
    ref = np.zeros((2, 2), dtype=complex)
    for p in range(2):
        for q in range(2):
            hphi = t_grid @ phi[q] + (ctx.potential.values - field * basis.nodes) * phi[q]
            ref[p, q] = np.sum(basis.weights * phi[p].conj() * hphi)
    h = one_body_integrals(b, basis, ctx.potential, field)
    assert np.allclose(h, ref, atol=1e-13)
    assert np.allclose(h, h.conj().T, atol=1e-14)


def test_dimension_mismatch():
    ctx = tiny_system(10, 2)
    with pytest.raises(ValueError):
        one_body_integrals(np.ones((2, 9), complex), ctx.basis, ctx.potential)
    with pytest.raises(ValueError):
        density_matrices(np.ones(3, complex), ctx.determinants)


def test_g_uniform_orbital_closed_form():
    ctx = tiny_system(9, 1)
    nb = 9
    b = np.full((1, nb), 1 / np.sqrt(nb), dtype=complex)
    g = two_body_integrals(b, ctx.kernel)
    assert g[0, 0, 0, 0] == pytest.approx(ctx.kernel.values.sum() / nb**2, abs=1e-14)


def test_g_matches_naive_loops():
    ctx = tiny_system(8, 2)
    b = random_orbitals(2, 8, 6)
    w = ctx.kernel.values
    ref = np.zeros((2, 2, 2, 2), dtype=complex)
    for p in range(2):
        for q in range(2):
            for r in range(2):
                for s in range(2):
                    for i in range(8):
                        for j in range(8):
                            ref[p, q, r, s] += b[p, i].conj() * b[q, i] * w[i, j] * b[r, j].conj() * b[s, j]
    assert np.allclose(two_body_integrals(b, ctx.kernel), ref, atol=1e-13)


@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_integral_symmetries(seed, m):
    ctx = tiny_system(10, 2)
    b = random_orbitals(m, 10, seed)
    g = two_body_integrals(b, ctx.kernel)
    assert np.allclose(g, g.transpose(2, 3, 0, 1), atol=1e-13)
    assert np.allclose(g, g.transpose(1, 0, 3, 2).conj(), atol=1e-13)
    mf = mean_fields(b, ctx.kernel)
    diag = np.einsum("rri->ri", mf)
    assert np.all(np.abs(diag.imag) < 1e-14) and np.all(diag.real > 0)
    # g_pqrs = sum_i conj(b_pi) g_rs(x_i) b_qi
    via_mf = np.einsum("pi,rsi,qi->pqrs", b.conj(), mf, b)
    assert np.allclose(via_mf, g, atol=1e-13)


def test_mean_field_of_localized_orbital():
    ctx = tiny_system(10, 1)
    b = np.zeros((1, 10), complex)
    b[0, 3] = 1.0
    assert np.allclose(mean_fields(b, ctx.kernel)[0, 0], ctx.kernel.values[:, 3])


# ---------------------------------------------------------------------------
# density matrices


def test_closed_shell_densities():
    ctx = tiny_system(8, 1)
    d = density_matrices(np.array([1.0 + 0j]), ctx.determinants)
    assert d.one_body[0, 0] == pytest.approx(2.0)
    assert d.two_body[0, 0, 0, 0] == pytest.approx(2.0)


@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_density_matrix_invariants(seed, m):
    ctx = tiny_system(8, m)
    c = random_state(ctx, seed).ci
    d = density_matrices(c, ctx.determinants)
    d1, d2 = d.one_body, d.two_body
    assert np.allclose(d1, d1.conj().T, atol=1e-14)
    assert np.trace(d1).real == pytest.approx(2.0, abs=1e-10)
    occ = d.natural_occupations()
    assert occ.min() >= -1e-12 and occ.max() <= 2 + 1e-12
    assert np.allclose(d2, d2.transpose(2, 3, 0, 1), atol=1e-14)
    assert np.allclose(np.einsum("pqrr->pq", d2), d1, atol=1e-13)  # N - 1 = 1


# ---------------------------------------------------------------------------
# regularized inverse and projector


def test_regularized_inverse_well_conditioned():
    inv = regularized_inverse(np.diag([2.0, 0.5]), 1e-8)
    assert np.allclose(inv, np.diag([0.5, 2.0]), rtol=1e-8, atol=0)


def test_regularized_inverse_singular():
    eps = 1e-8
    inv = regularized_inverse(np.diag([2.0, 0.0]), eps)
    assert np.all(np.isfinite(inv))
    assert inv[1, 1] == pytest.approx(1 / eps, rel=1e-12)


@given(seed=st.integers(0, 10_000), m=st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_regularized_inverse_self_consistent(seed, m):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    d = a @ a.conj().T
    eps = 1e-8
    lam, u = np.linalg.eigh(d)
    d_reg = (u * (lam + eps * np.exp(-np.clip(lam, 0, None) / eps))) @ u.conj().T
    assert np.allclose(regularized_inverse(d, eps) @ d_reg, np.eye(m), atol=1e-12 * np.linalg.cond(d_reg))
    if lam.min() > 1e-3:
        assert np.allclose(regularized_inverse(d, eps), np.linalg.inv(d), rtol=1e-8, atol=1e-12)


def test_regularized_inverse_rejects_non_hermitian():
    with pytest.raises(ValueError):
        regularized_inverse(np.array([[1.0, 1.0], [0.0, 1.0]]))


@given(seed=st.integers(0, 10_000), m=st.integers(1, 5))
@settings(max_examples=30, deadline=None)
def test_projector_properties(seed, m):
    nb = 12
    b = random_orbitals(m, nb, seed)
    rng = np.random.default_rng(seed + 1)
    v = rng.normal(size=(3, nb)) + 1j * rng.normal(size=(3, nb))
    pv = project_complement(b, v)
    assert np.max(np.abs(b.conj() @ pv.T)) <= 1e-12
    assert np.allclose(project_complement(b, pv), pv, atol=1e-13)
    assert np.allclose(project_complement(b, b), 0, atol=1e-13)
    assert np.allclose(project_complement(b, pv), pv, atol=1e-13)


# ---------------------------------------------------------------------------
# equations of motion


@given(seed=st.integers(0, 10_000), m=st.integers(1, 4), field=st.floats(-0.1, 0.1))
@settings(max_examples=25, deadline=None)
def test_gauge_condition(seed, m, field):
    ctx = tiny_system(10, m)
    s = random_state(ctx, seed)
    db, _ = rhs(s, ctx, "real", field=field)
    assert np.max(np.abs(s.orbitals.conj() @ db.T)) <= 1e-10
    db, _ = rhs(s, ctx, "imaginary")
    assert np.max(np.abs(s.orbitals.conj() @ db.T)) <= 1e-10


@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_energy_consistency_and_hermiticity(seed, m):
    ctx = tiny_system(10, m)
    s = random_state(ctx, seed)
    ints = integrals(s.orbitals, ctx, 0.03)
    dens = density_matrices(s.ci, ctx.determinants)
    hci = ctx.determinants.hamiltonian(ints.one_body, ints.two_body)
    assert abs(hci - hci.conj().T).max() <= 1e-12
    e_ci = (s.ci.conj() @ (hci @ s.ci)).real
    assert energy_from_densities(ints.one_body, ints.two_body, dens) == pytest.approx(e_ci, abs=1e-12)


@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_unitary_mixing_invariance(seed, m):
    ctx = tiny_system(10, m)
    s = random_state(ctx, seed)
    rng = np.random.default_rng(seed + 7)
    u, _ = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
    cmat = s.ci.reshape(m, m)  # index i*M + j: alpha i, beta j
    rotated = WaveState(u @ s.orbitals, (u.conj() @ cmat @ u.conj().T).ravel())
    assert state_energy(rotated, ctx) == pytest.approx(state_energy(s, ctx), abs=1e-12)


def hartree_fock_rhs(b, ctx, field):
    """Closed-shell TDHF: i d/dt phi = P (h + J) phi with J(x_i) = sum_j W_ij |b_j|^2."""
    basis = ctx.basis
    h_phi = basis.kinetic @ b[0] + (ctx.potential.values - field * basis.nodes) * b[0]
    j = ctx.kernel.values @ np.abs(b[0]) ** 2
    f = h_phi + j * b[0]
    f = f - (b[0].conj() @ f) * b[0]
    return -1j * f


@pytest.mark.parametrize("seed", range(4))
def test_m1_reduces_to_hartree_fock(seed):
    ctx = tiny_system(14, 1)
    s = random_state(ctx, seed)
    s.ci = np.array([np.exp(0.3j)])
    db, dc = rhs(s, ctx, "real", field=0.05)
    assert np.allclose(db[0], hartree_fock_rhs(s.orbitals, ctx, 0.05), atol=1e-13)
    b = s.orbitals[0]
    h11 = b.conj() @ (ctx.basis.kinetic @ b + (ctx.potential.values - 0.05 * ctx.basis.nodes) * b)
    g1111 = (np.abs(b) ** 2) @ ctx.kernel.values @ (np.abs(b) ** 2)
    assert dc[0] == pytest.approx(-1j * (2 * h11 + g1111) * s.ci[0], abs=1e-13)


def test_imaginary_mode_is_minus_i_times_real_mode_without_field():
    ctx = tiny_system(10, 2)
    s = random_state(ctx, 3)
    rb, rc = rhs(s, ctx, "real", field=0.0)
    ib, ic = rhs(s, ctx, "imaginary")
    assert np.allclose(ib, -1j * rb, atol=1e-14) and np.allclose(ic, -1j * rc, atol=1e-14)
    with pytest.raises(ValueError):
        rhs(s, ctx, "sideways")


def test_singular_density_warning():
    ctx = tiny_system(10, 2)
    s = initial_guess(ctx)  # single determinant: two empty natural orbitals
    with warnings.catch_warnings():
        warnings.simplefilter("error", SingularDensityWarning)
        with pytest.raises(SingularDensityWarning):
            rhs(s, ctx)


def test_ground_state_is_stationary():
    ctx = tiny_system(12, 2, (-6.0, 6.0))
    res = relax_to_groundstate(initial_guess(ctx), ctx, tol_residual=1e-10)
    db, dc = rhs(res.state, ctx, "real", field=0.0)
    assert np.linalg.norm(db) < 1e-9
    assert np.allclose(dc, -1j * res.energy * res.state.ci, atol=1e-9)


@pytest.mark.parametrize("nb", [4, 6, 8])
def test_full_ci_limit_matches_dense_diagonalization(nb):
    basis = build_sine_dvr(-4.0, 4.0, nb)
    pot, ker = soft_coulomb_potential(basis), soft_coulomb_interaction(basis)
    ctx = make_context(basis, pot, ker, nb)
    res = relax_to_groundstate(initial_guess(ctx), ctx, tol_residual=1e-9)
    exact = np.linalg.eigvalsh(dense_two_electron_hamiltonian(basis, pot, ker))[0]
    assert res.energy == pytest.approx(exact, abs=1e-8)
