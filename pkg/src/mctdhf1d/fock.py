"""Spin-restricted Slater determinants and excitation-operator coupling tables.

Determinants are stored as bitmasks over ``2M`` spin orbitals ordered with all
alpha orbitals first (bit ``k``) and all beta orbitals after them (bit
``M + k``).  A determinant is the product of creation operators in that
ascending order acting on the vacuum, which fixes every fermionic phase.

Every non-zero matrix element of

    E_pq   = sum_s  a+_ps a_qs
    e_pqrs = sum_st a+_ps a+_rt a_st a_qs

between determinants is a sum of per-spin contributions of +-1.  These
contributions are enumerated once and stored; all later contractions
(Hamiltonian action, density matrices) are sparse products with them.
Orbital indices are 0-based throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class InfeasibleSpaceError(ValueError):
    """No determinant exists for the requested (M, N, S_z)."""


@dataclass(frozen=True)
class Determinant:
    alpha_occ: frozenset[int]
    beta_occ: frozenset[int]

    def mask(self, n_orbitals: int) -> int:
        bits = 0
        for k in self.alpha_occ:
            bits |= 1 << k
        for k in self.beta_occ:
            bits |= 1 << (n_orbitals + k)
        return bits


@dataclass(frozen=True)
class OneBodyTable:
    """Per-spin contributions ``sign = <row| a+_p a_q |col>``."""

    row: np.ndarray
    col: np.ndarray
    p: np.ndarray
    q: np.ndarray
    sign: np.ndarray

    def __len__(self) -> int:
        return len(self.sign)


@dataclass(frozen=True)
class TwoBodyTable:
    """Per-spin contributions to ``<row| e_pqrs |col>``.

    Only entries with ``p >= r`` are stored; :meth:`expanded` restores the
    mirrored ``(r, s, p, q)`` entries for ``p > r``.
    """

    row: np.ndarray
    col: np.ndarray
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    s: np.ndarray
    sign: np.ndarray

    def __len__(self) -> int:
        return len(self.sign)

    def expanded(self) -> TwoBodyTable:
        m = self.p > self.r
        cat = np.concatenate
        return TwoBodyTable(
            cat([self.row, self.row[m]]),
            cat([self.col, self.col[m]]),
            cat([self.p, self.r[m]]),
            cat([self.q, self.s[m]]),
            cat([self.r, self.p[m]]),
            cat([self.s, self.q[m]]),
            cat([self.sign, self.sign[m]]),
        )


@dataclass(frozen=True, eq=False)
class DeterminantBasis:
    determinants: tuple[Determinant, ...]
    n_spatial_orbitals: int
    n_particles: int
    sz: float
    one_body_table: OneBodyTable | None = field(default=None, repr=False)
    two_body_table: TwoBodyTable | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.determinants)

    @property
    def size(self) -> int:
        return len(self.determinants)

    @cached_property
    def masks(self) -> np.ndarray:
        return np.array([d.mask(self.n_spatial_orbitals) for d in self.determinants], dtype=np.int64)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {int(m): i for i, m in enumerate(self.masks)}

    def _require_tables(self) -> None:
        if self.one_body_table is None or self.two_body_table is None:
            raise RuntimeError("coupling tables not built; call build_coupling_tables first")

    @cached_property
    def _assembly(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, sp.csr_matrix, sp.csr_matrix]:
        # Sparse maps from flattened integrals onto the nonzero pattern of H.
        # Pattern keys are sorted by row * n + col, i.e. already in CSR order.
        self._require_tables()
        m = self.n_spatial_orbitals
        n = self.size
        t1 = self.one_body_table
        t2 = self.two_body_table.expanded()
        k1 = t1.row * n + t1.col
        k2 = t2.row * n + t2.col
        keys = np.unique(np.concatenate([k1, k2]))
        pos1 = np.searchsorted(keys, k1)
        pos2 = np.searchsorted(keys, k2)
        a1 = sp.csr_matrix(
            (t1.sign.astype(float), (pos1, t1.p * m + t1.q)), shape=(len(keys), m * m)
        )
        a2 = sp.csr_matrix(
            (t2.sign.astype(float), (pos2, ((t2.p * m + t2.q) * m + t2.r) * m + t2.s)),
            shape=(len(keys), m**4),
        )
        a1.sum_duplicates()
        a2.sum_duplicates()
        rows = keys // n
        cols = keys % n
        indptr = np.searchsorted(rows, np.arange(n + 1))
        return rows, cols, indptr, a1, a2

    @cached_property
    def _gather(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        # transposed assembly maps, reused by every density evaluation
        _, _, _, a1, a2 = self._assembly
        return a1.T.tocsr(), a2.T.tocsr()

    def hamiltonian(self, h: np.ndarray, g: np.ndarray) -> sp.csr_matrix:
        """Sparse CI matrix ``sum h_pq E_pq + 1/2 sum g_pqrs e_pqrs``."""
        rows, cols, indptr, a1, a2 = self._assembly
        data = a1 @ h.ravel() + 0.5 * (a2 @ g.ravel())
        return sp.csr_matrix((data, cols, indptr), shape=(self.size, self.size))

    def transition_densities(self, bra: np.ndarray, ket: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``<bra|E_pq|ket>`` and ``<bra|e_pqrs|ket>`` as (M, M) and (M, M, M, M) arrays."""
        rows, cols = self._assembly[:2]
        g1, g2 = self._gather
        m = self.n_spatial_orbitals
        w = np.conj(bra[rows]) * ket[cols]
        d1 = (g1 @ w).reshape(m, m)
        d2 = (g2 @ w).reshape(m, m, m, m)
        return d1, d2

    def one_body_matrix(self, p: int, q: int) -> np.ndarray:
        """Dense matrix of ``E_pq`` in this determinant basis."""
        self._require_tables()
        t = self.one_body_table
        out = np.zeros((self.size, self.size))
        sel = (t.p == p) & (t.q == q)
        np.add.at(out, (t.row[sel], t.col[sel]), t.sign[sel])
        return out

    def two_body_matrix(self, p: int, q: int, r: int, s: int) -> np.ndarray:
        """Dense matrix of ``e_pqrs`` in this determinant basis."""
        self._require_tables()
        t = self.two_body_table.expanded()
        out = np.zeros((self.size, self.size))
        sel = (t.p == p) & (t.q == q) & (t.r == r) & (t.s == s)
        np.add.at(out, (t.row[sel], t.col[sel]), t.sign[sel])
        return out


def _strings(n_orbitals: int, n_electrons: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(n_orbitals), n_electrons))


def enumerate_determinants(n_orbitals: int, n_particles: int, sz: float = 0.0) -> DeterminantBasis:
    """All determinants with ``n_particles`` electrons and spin projection ``sz``.

    Ordering is lexicographic in (alpha string, beta string), so for two
    electrons with ``sz = 0`` determinant ``i * M + j`` has alpha in orbital
    ``i`` and beta in orbital ``j``.
    """
    n_alpha2 = n_particles + 2 * sz
    if n_orbitals < 1 or n_particles < 0:
        raise InfeasibleSpaceError(f"invalid M={n_orbitals}, N={n_particles}")
    if abs(n_alpha2 - round(n_alpha2)) > 1e-12 or round(n_alpha2) % 2:
        raise InfeasibleSpaceError(f"S_z={sz} inconsistent with N={n_particles}")
    n_alpha = round(n_alpha2) // 2
    n_beta = n_particles - n_alpha
    if not (0 <= n_alpha <= n_orbitals and 0 <= n_beta <= n_orbitals):
        raise InfeasibleSpaceError(
            f"cannot place {n_alpha} alpha and {n_beta} beta electrons in {n_orbitals} orbitals"
        )
    dets = tuple(
        Determinant(frozenset(a), frozenset(b))
        for a in _strings(n_orbitals, n_alpha)
        for b in _strings(n_orbitals, n_beta)
    )
    return DeterminantBasis(dets, n_orbitals, n_particles, float(sz))


def _annihilate(mask: int, bit: int) -> tuple[int, int]:
    if not (mask >> bit) & 1:
        return 0, -1
    sign = -1 if bin(mask & ((1 << bit) - 1)).count("1") % 2 else 1
    return sign, mask ^ (1 << bit)


def _create(mask: int, bit: int) -> tuple[int, int]:
    if (mask >> bit) & 1:
        return 0, -1
    sign = -1 if bin(mask & ((1 << bit) - 1)).count("1") % 2 else 1
    return sign, mask | (1 << bit)


def build_coupling_tables(basis: DeterminantBasis) -> DeterminantBasis:
    """Enumerate every nonzero per-spin contribution of ``E_pq`` and ``e_pqrs``."""
    m = basis.n_spatial_orbitals
    index = basis.index_of
    spins = (0, m)

    one: list[tuple[int, int, int, int, int]] = []
    two: list[tuple[int, int, int, int, int, int, int]] = []
    for col, mask in enumerate(basis.masks.tolist()):
        for off_q in spins:
            for q in range(m):
                s1, m1 = _annihilate(mask, off_q + q)
                if not s1:
                    continue
                # one-body: a+_p a_q
                for p in range(m):
                    s2, m2 = _create(m1, off_q + p)
                    if s2:
                        one.append((index[m2], col, p, q, s1 * s2))
                # two-body: a+_p(sigma) a+_r(tau) a_s(tau) a_q(sigma)
                for off_s in spins:
                    for s in range(m):
                        s2, m2 = _annihilate(m1, off_s + s)
                        if not s2:
                            continue
                        for r in range(m):
                            s3, m3 = _create(m2, off_s + r)
                            if not s3:
                                continue
                            for p in range(r, m):
                                s4, m4 = _create(m3, off_q + p)
                                if s4:
                                    two.append((index[m4], col, p, q, r, s, s1 * s2 * s3 * s4))

    a1 = np.array(one, dtype=np.int64).reshape(-1, 5)
    a2 = np.array(two, dtype=np.int64).reshape(-1, 7)
    t1 = OneBodyTable(*(a1[:, k].copy() for k in range(5)))
    t2 = TwoBodyTable(*(a2[:, k].copy() for k in range(7)))
    return replace(basis, one_body_table=t1, two_body_table=t2)


def make_determinant_basis(n_orbitals: int, n_particles: int = 2, sz: float = 0.0) -> DeterminantBasis:
    """Enumerate determinants and build their coupling tables."""
    return build_coupling_tables(enumerate_determinants(n_orbitals, n_particles, sz))


def apply_excitation(basis: DeterminantBasis, c: np.ndarray, p: int, q: int) -> np.ndarray:
    """``E_pq |c>`` through the stored one-body table."""
    basis._require_tables()
    c = np.asarray(c)
    if c.shape != (basis.size,):
        raise ValueError(f"coefficient vector has shape {c.shape}, basis size is {basis.size}")
    t = basis.one_body_table
    sel = (t.p == p) & (t.q == q)
    out = np.zeros(basis.size, dtype=np.result_type(c, float))
    np.add.at(out, t.row[sel], t.sign[sel] * c[t.col[sel]])
    return out
