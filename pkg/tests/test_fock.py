from __future__ import annotations

import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import annihilators
from mctdhf1d.fock import (
    InfeasibleSpaceError,
    apply_excitation,
    enumerate_determinants,
    make_determinant_basis,
)


def fock_operators(m):
    """Spin-summed E_pq and e_pqrs on the full 2^(2M) Fock space, alpha modes first."""
    a = annihilators(2 * m)
    ad = [x.T for x in a]
    spins = (0, m)

    def e1(p, q):
        return sum(ad[s + p] @ a[s + q] for s in spins)

    def e2(p, q, r, s):
        return sum(ad[x + p] @ ad[y + r] @ a[y + s] @ a[x + q] for x in spins for y in spins)

    return e1, e2


def restrict(op, dets):
    idx = dets.masks
    return op[np.ix_(idx, idx)]


@pytest.mark.parametrize("m,n,sz,size", [(1, 2, 0, 1), (2, 2, 0, 4), (4, 2, 0, 16), (3, 2, 1, 3), (4, 3, 0.5, 24)])
def test_space_sizes(m, n, sz, size):
    dets = enumerate_determinants(m, n, sz)
    n_a = int(n / 2 + sz)
    assert dets.size == size == comb(m, n_a) * comb(m, n - n_a)


def test_two_electron_ordering():
    dets = enumerate_determinants(3, 2)
    for i, j in itertools.product(range(3), repeat=2):
        d = dets.determinants[3 * i + j]
        assert d.alpha_occ == {i} and d.beta_occ == {j}


@pytest.mark.parametrize("m,n,sz", [(2, 5, 0.5), (3, 2, 0.5), (2, 2, 2), (2, 4, 1)])
def test_infeasible_spaces(m, n, sz):
    with pytest.raises(InfeasibleSpaceError):
        enumerate_determinants(m, n, sz)


def test_single_orbital_closed_shell():
    dets = make_determinant_basis(1, 2)
    assert dets.one_body_matrix(0, 0)[0, 0] == 2
    assert dets.two_body_matrix(0, 0, 0, 0)[0, 0] == 2


@pytest.mark.parametrize("m,n,sz", [(2, 2, 0), (3, 2, 0), (3, 2, 1), (3, 3, 0.5), (2, 3, -0.5)])
def test_one_body_matches_jordan_wigner(m, n, sz):
    dets = make_determinant_basis(m, n, sz)
    e1, _ = fock_operators(m)
    for p, q in itertools.product(range(m), repeat=2):
        assert np.array_equal(dets.one_body_matrix(p, q), restrict(e1(p, q), dets))


@pytest.mark.parametrize("m,n,sz", [(2, 2, 0), (3, 2, 0), (3, 3, 0.5)])
def test_two_body_matches_jordan_wigner(m, n, sz):
    dets = make_determinant_basis(m, n, sz)
    _, e2 = fock_operators(m)
    for p, q, r, s in itertools.product(range(m), repeat=4):
        assert np.array_equal(dets.two_body_matrix(p, q, r, s), restrict(e2(p, q, r, s), dets))


def test_two_body_identity_e_pqrs():
    # e_pqrs = E_pq E_rs - delta_qr E_ps
    dets = make_determinant_basis(3, 2)
    m = 3
    for p, q, r, s in itertools.product(range(m), repeat=4):
        ref = dets.one_body_matrix(p, q) @ dets.one_body_matrix(r, s) - (q == r) * dets.one_body_matrix(p, s)
        assert np.array_equal(dets.two_body_matrix(p, q, r, s), ref)


def random_integrals(m, rng):
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    h = a + a.conj().T
    # g_pqrs = conj(g_qpsr) = g_rspq, built from pair densities of random orbitals
    b = rng.normal(size=(m, 7)) + 1j * rng.normal(size=(m, 7))
    w = rng.normal(size=(7, 7))
    w = w + w.T
    pairs = np.einsum("pi,qi->pqi", b.conj(), b)
    g = np.einsum("pqi,ij,rsj->pqrs", pairs, w, pairs)
    return h, g


@pytest.mark.parametrize("m,n", [(2, 2), (3, 2), (3, 3), (4, 2)])
def test_hamiltonian_matches_fock_space(m, n):
    rng = np.random.default_rng(m * 10 + n)
    h, g = random_integrals(m, rng)
    dets = make_determinant_basis(m, n, 0.0 if n % 2 == 0 else 0.5)
    e1, e2 = fock_operators(m)
    ref = sum(h[p, q] * e1(p, q) for p in range(m) for q in range(m))
    ref = ref + 0.5 * sum(
        g[p, q, r, s] * e2(p, q, r, s) for p, q, r, s in itertools.product(range(m), repeat=4)
    )
    hmat = dets.hamiltonian(h, g).toarray()
    assert np.allclose(hmat, restrict(ref, dets), atol=1e-12)
    assert np.max(np.abs(hmat - hmat.conj().T)) <= 1e-12


@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_transition_densities_match_operator_expectations(seed, m):
    rng = np.random.default_rng(seed)
    dets = make_determinant_basis(m, 2)
    bra = rng.normal(size=dets.size) + 1j * rng.normal(size=dets.size)
    ket = rng.normal(size=dets.size) + 1j * rng.normal(size=dets.size)
    d1, d2 = dets.transition_densities(bra, ket)
    for p, q in itertools.product(range(m), repeat=2):
        assert d1[p, q] == pytest.approx(bra.conj() @ dets.one_body_matrix(p, q) @ ket, abs=1e-12)
    for p, q, r, s in itertools.product(range(m), repeat=4):
        ref = bra.conj() @ dets.two_body_matrix(p, q, r, s) @ ket
        assert d2[p, q, r, s] == pytest.approx(ref, abs=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_energy_from_densities_equals_ci_expectation(seed):
    rng = np.random.default_rng(seed)
    m = 3
    h, g = random_integrals(m, rng)
    dets = make_determinant_basis(m, 2)
    c = rng.normal(size=dets.size) + 1j * rng.normal(size=dets.size)
    d1, d2 = dets.transition_densities(c, c)
    e_dens = np.sum(h * d1) + 0.5 * np.sum(g * d2)
    e_ci = c.conj() @ (dets.hamiltonian(h, g) @ c)
    assert abs(e_dens - e_ci) <= 1e-12 * max(1.0, abs(e_ci))


def test_apply_excitation():
    dets = make_determinant_basis(3, 2)
    c = np.arange(dets.size, dtype=float) + 1j
    for p, q in itertools.product(range(3), repeat=2):
        assert np.allclose(apply_excitation(dets, c, p, q), dets.one_body_matrix(p, q) @ c)
    with pytest.raises(ValueError):
        apply_excitation(dets, c[:-1], 0, 0)


def test_tables_required():
    dets = enumerate_determinants(2, 2)
    with pytest.raises(RuntimeError):
        dets.one_body_matrix(0, 0)
