from __future__ import annotations

import functools

import numpy as np

from mctdhf1d.dvr import build_sine_dvr, soft_coulomb_interaction, soft_coulomb_potential
from mctdhf1d.mctdhf import WaveState, make_context
from mctdhf1d.propagate import lowdin_orthonormalize


@functools.lru_cache(maxsize=None)
def tiny_system(n_points: int = 10, m: int = 2, box: tuple[float, float] = (-5.0, 5.0)):
    basis = build_sine_dvr(box[0], box[1], n_points)
    return make_context(basis, soft_coulomb_potential(basis), soft_coulomb_interaction(basis), m)


def random_state(ctx, seed: int = 0) -> WaveState:
    rng = np.random.default_rng(seed)
    m, nb = ctx.n_orbitals, ctx.basis.n_points
    b = rng.normal(size=(m, nb)) + 1j * rng.normal(size=(m, nb))
    c = rng.normal(size=ctx.determinants.size) + 1j * rng.normal(size=ctx.determinants.size)
    return WaveState(lowdin_orthonormalize(b), c / np.linalg.norm(c))


def annihilators(n_modes: int) -> list[np.ndarray]:
    """Dense Jordan-Wigner annihilation operators on the 2^n occupation space.

    Basis state ``k`` has mode ``j`` occupied when bit ``j`` of ``k`` is set,
    and ``a_j`` carries the sign ``(-1)^(occupied modes below j)``.
    """
    dim = 1 << n_modes
    ops = []
    for j in range(n_modes):
        a = np.zeros((dim, dim))
        for k in range(dim):
            if (k >> j) & 1:
                sign = (-1) ** bin(k & ((1 << j) - 1)).count("1")
                a[k ^ (1 << j), k] = sign
        ops.append(a)
    return ops


def dense_two_electron_hamiltonian(basis, potential, kernel) -> np.ndarray:
    """Explicit Kronecker-product Hamiltonian of two distinguishable particles on the grid."""
    n = basis.n_points
    h1 = basis.kinetic + np.diag(potential.values)
    eye = np.eye(n)
    return np.kron(h1, eye) + np.kron(eye, h1) + np.diag(kernel.values.ravel())


# verdict lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
