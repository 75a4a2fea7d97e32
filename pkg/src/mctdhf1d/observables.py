"""Observables of either solver and dipole spectra.

Energies, dipoles and two-particle densities are computed from an MCTDHF
state through its density matrices.  The spectrum of a dipole trajectory is
the magnitude of the discrete Fourier transform of the mean-subtracted,
Blackman-Harris windowed signal.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.signal.windows import blackmanharris

from .dvr import SineDvrBasis
from .mctdhf import (
    SystemContext,
    WaveState,
    density_matrices,
    energy_from_densities,
    integrals,
    position_matrix,
)

DEFAULT_PEAK_THRESHOLD = 1e-6
# a single line two bins off its maximum keeps at most 0.454 of it under this
# window; the rest is headroom for neighbouring lines and leakage
MAIN_LOBE_RATIO = 0.75


class NonUniformStrideError(ValueError):
    pass


def total_energy(state: WaveState, ctx: SystemContext) -> float:
    """Field-free energy ``sum h D + 1/2 sum g d`` of a normalized state."""
    ints = integrals(state.orbitals, ctx, 0.0)
    dens = density_matrices(state.ci, ctx.determinants)
    return energy_from_densities(ints.one_body, ints.two_body, dens)


def dipole_expectation(state: WaveState, ctx: SystemContext) -> float:
    """``<sum_k x_k> = sum_pq x_pq D_pq``."""
    d = density_matrices(state.ci, ctx.determinants).one_body
    return float(np.sum(position_matrix(state.orbitals, ctx.basis) * d).real)


def natural_occupations(state: WaveState, ctx: SystemContext) -> np.ndarray:
    return density_matrices(state.ci, ctx.determinants).natural_occupations()


def two_particle_density(state: WaveState, ctx: SystemContext) -> np.ndarray:
    """Pair density ``rho2(x_i, x_j)`` normalized to integrate to one.

    Directly comparable with ``|psi(x, y)|^2`` from the grid solver.
    """
    n = ctx.n_particles
    if n != 2:
        raise ValueError("two-particle density comparison is defined for N = 2")
    b = state.orbitals
    m, nb = b.shape
    d = density_matrices(state.ci, ctx.determinants).two_body.reshape(m * m, m * m)
    pairs = (b.conj()[:, None, :] * b[None, :, :]).reshape(m * m, nb)
    rho = (pairs.T @ d @ pairs).real
    w = ctx.basis.weights
    return rho / np.outer(w, w) / (n * (n - 1))


@dataclass
class DipoleTrajectory:
    times: np.ndarray
    values: np.ndarray
    source: Literal["mctdhf", "tdse"] = "mctdhf"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")

    @property
    def stride(self) -> float:
        dt = np.diff(self.times)
        if len(dt) == 0 or np.any(dt <= 0):
            raise NonUniformStrideError("times must be strictly increasing")
        if np.max(np.abs(dt - dt[0])) > 1e-9 * max(1.0, abs(dt[0])):
            raise NonUniformStrideError("trajectory is not uniformly sampled")
        return float(dt[0])


@dataclass
class SpectrumResult:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    peaks: list[tuple[float, float]] = field(default_factory=list)
    resolution: float = float("nan")

    def first_peak(self, above: float = 0.0) -> tuple[float, float] | None:
        for p in self.peaks:
            if p[0] > above:
                return p
        return None

    def peaks_in(self, lo: float, hi: float = np.inf) -> list[tuple[float, float]]:
        return [p for p in self.peaks if lo < p[0] <= hi]


def window_signal(values: np.ndarray) -> np.ndarray:
    """Mean removal followed by the 4-term minimum Blackman-Harris window."""
    x = np.asarray(values, dtype=float)
    return (x - x.mean()) * blackmanharris(len(x))


@functools.lru_cache(maxsize=8)
def leakage_envelope(n: int, oversample: int = 8) -> np.ndarray:
    """Largest window-transform magnitude at or beyond each bin distance, relative to its peak.

    Entry ``k`` bounds the leakage a unit-amplitude line deposits ``k`` bins away.
    """
    w = blackmanharris(n)
    mag = np.abs(np.fft.rfft(w, oversample * n))
    mag /= mag[0]
    # running maximum from the far end: envelope is non-increasing in distance
    env = np.maximum.accumulate(mag[::-1])[::-1]
    return env[:: oversample].copy()


def find_peaks(
    freqs: np.ndarray,
    amps: np.ndarray,
    threshold: float,
    envelope: np.ndarray | None = None,
    leakage_margin: float = 2.0,
    lobe_ratio: float | None = None,
) -> list[tuple[float, float]]:
    """Local maxima above ``threshold * max(amps)`` with quadratic sub-bin refinement.

    The parabola is fitted to the log amplitude of the three bins around the
    maximum.  With ``envelope`` (see :func:`leakage_envelope`), maxima that the
    window leakage of stronger peaks can account for, within ``leakage_margin``,
    are dropped as sidelobes.  With ``lobe_ratio``, a maximum must also fall
    to that fraction of its height two bins away on both sides, as a resolved
    line's main lobe does; flat sidelobe floors and unresolved clusters fail.
    """
    if len(amps) < 3:
        return []
    top = float(np.max(amps[1:]))
    if not top > 0.0:
        return []
    cut = threshold * top
    a = amps
    k = np.arange(1, len(a) - 1)
    idx = k[(a[k] > a[k - 1]) & (a[k] >= a[k + 1]) & (a[k] > cut)]
    if lobe_ratio is not None:
        padded = np.concatenate([[0.0, 0.0], a, [0.0, 0.0]])
        shoulders = np.maximum(padded[idx], padded[idx + 4])
        idx = idx[shoulders <= lobe_ratio * a[idx]]
    if envelope is not None and len(idx) > 0:
        last = len(envelope) - 1

        def leakage(i: int, sources: list[int]) -> float:
            # the zero-frequency residual left by mean removal leaks like a line at bin 0
            total = envelope[min(i, last)] * a[0]
            if sources:
                src = np.array(sources, dtype=int)
                # each real line also has its negative-frequency image at -src
                near = envelope[np.minimum(np.abs(src - i), last)]
                image = envelope[np.minimum(src + i, last)]
                total += np.sum((near + image) * a[src])
            return float(total)

        order = idx[np.argsort(a[idx])[::-1]]
        kept: list[int] = []
        for i in order:
            if a[i] > leakage_margin * leakage(int(i), kept):
                kept.append(int(i))
        idx = np.sort(np.array(kept, dtype=int))
    dw = freqs[1] - freqs[0]
    peaks = []
    with np.errstate(divide="ignore"):
        logs = np.log(a)
    for i in idx:
        y0, y1, y2 = logs[i - 1 : i + 2]
        denom = y0 - 2 * y1 + y2
        delta = 0.5 * (y0 - y2) / denom if np.isfinite(denom) and denom < 0 else 0.0
        delta = float(np.clip(delta, -0.5, 0.5))
        peak_log = y1 - 0.25 * (y0 - y2) * delta if np.isfinite(y0 + y2) else y1
        peaks.append((float(freqs[i] + delta * dw), float(np.exp(peak_log))))
    return peaks


def dipole_spectrum(
    traj: DipoleTrajectory,
    window: Literal["blackman-harris"] = "blackman-harris",
    threshold: float = DEFAULT_PEAK_THRESHOLD,
    min_samples: int = 1024,
) -> SpectrumResult:
    """Windowed spectrum ``|DFT|`` versus angular frequency in a.u.

    Peaks are local maxima above ``threshold`` times the largest amplitude
    that have the shape of a resolved line and are not sidelobes of stronger
    lines.
    """
    if window != "blackman-harris":
        raise ValueError(f"unsupported window {window!r}")
    dt = traj.stride
    n = len(traj.values)
    if n < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {n}")
    x = np.asarray(traj.values, dtype=float)
    amps = np.abs(np.fft.rfft(window_signal(x)))
    freqs = 2 * np.pi * np.fft.rfftfreq(n, dt)
    # a constant signal leaves only roundoff after mean removal
    floor = 1e-13 * np.max(np.abs(x), initial=0.0) * n
    peaks = [] if np.max(amps) <= floor else find_peaks(freqs, amps, threshold, leakage_envelope(n), lobe_ratio=MAIN_LOBE_RATIO)
    return SpectrumResult(freqs, amps, peaks, 2 * np.pi / (n * dt))


# ---------------------------------------------------------------------------
# result files


def write_trajectory(path: str | Path, traj: DipoleTrajectory) -> None:
    data = np.column_stack([traj.times, traj.values])
    np.savetxt(path, data, delimiter=",", header="t,dipole", comments="", fmt="%.15g")


def read_trajectory(path: str | Path, source: str = "mctdhf") -> DipoleTrajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DipoleTrajectory(data[:, 0], data[:, 1], source)


def write_spectrum(path: str | Path, spec: SpectrumResult) -> None:
    with np.errstate(divide="ignore"):
        logs = np.log10(spec.amplitudes)
    data = np.column_stack([spec.frequencies, spec.amplitudes, logs])
    np.savetxt(path, data, delimiter=",", header="omega,amplitude,log10_amplitude", comments="", fmt="%.15g")


def write_density(path: str | Path, rho: np.ndarray, basis: SineDvrBasis, **meta) -> Path:
    """Plain-text matrix plus a ``.json`` sidecar with the grid metadata."""
    path = Path(path)
    np.savetxt(path, rho, fmt="%.15g")
    sidecar = path.with_suffix(path.suffix + ".json")
    info = {
        "box": [basis.x_min, basis.x_max],
        "n_points": basis.n_points,
        "spacing": basis.spacing,
        "normalization": "sum_ij w_i w_j rho_ij = 1",
        "integral": float(np.sum(rho) * basis.spacing**2),
        **meta,
    }
    sidecar.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return sidecar


def read_density(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return np.loadtxt(path, ndmin=2), meta
