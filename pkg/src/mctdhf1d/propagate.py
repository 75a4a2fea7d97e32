"""Time integration of the combined MCTDHF state.

Two explicit integrators work on flat complex vectors: classical RK4 with a
fixed step, and the Dormand-Prince 5(4) embedded pair with a PI step-size
controller.  On top of them sit imaginary-time relaxation (with Loewdin
re-orthonormalization after every step) and the real-time driver with
observers sampled on a fixed stride.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Literal, Mapping

import numpy as np

from .mctdhf import FieldPulse, Mode, SystemContext, WaveState, rhs, state_energy
from .mctdhf import density_matrices, integrals, orbital_rhs

logger = logging.getLogger(__name__)

Method = Literal["rk4", "dopri5"]
VectorField = Callable[[float, np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """Base class for failures inside a propagation loop."""


class StepSizeUnderflow(IntegrationError):
    pass


class NumericalAbort(IntegrationError):
    """Non-finite values appeared; ``last_state`` holds the last valid state."""

    def __init__(self, message: str, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConvergenceError(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = "dopri5"
    dt_initial: float = 0.01
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    dt_max: float = 1.0
    dt_min: float = 1e-12

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.dt_initial <= self.dt_max:
            raise ValueError("need 0 < dt_initial <= dt_max")
        if self.method not in ("rk4", "dopri5"):
            raise ValueError(f"unknown integrator {self.method!r}")


ACCEPTANCE_CONFIG = IntegratorConfig(abs_tol=1e-9, rel_tol=1e-9)
EXPLORATORY_CONFIG = IntegratorConfig(abs_tol=1e-7, rel_tol=1e-7)


# ---------------------------------------------------------------------------
# integrators on flat vectors

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def rk4_step(f: VectorField, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def dopri5_step(
    f: VectorField, t: float, y: np.ndarray, dt: float, k1: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Dormand-Prince step; returns ``(y_new, error_vector, f(y_new))``."""
    k = [f(t, y) if k1 is None else k1]
    for i in range(1, 7):
        yi = y.copy()
        for a, kj in zip(_DP_A[i], k):
            if a:
                yi += (dt * a) * kj
        k.append(f(t + _DP_C[i] * dt, yi))
        if i == 6:
            y_new = yi
    err = dt * sum(e * kj for e, kj in zip(_DP_E, k) if e)
    return y_new, err, k[6]


class AdaptiveStepper:
    """Dormand-Prince 5(4) with a PI controller and first-same-as-last reuse.

    ``k1`` caches ``f(t, y)`` of the current point; call :meth:`reset` after
    modifying ``y`` or the vector field between steps.
    """

    safety = 0.9
    fac_min = 0.2
    fac_max = 5.0
    beta = 0.04
    alpha = 0.2 - 0.75 * 0.04

    def __init__(self, f: VectorField, config: IntegratorConfig):
        self.f = f
        self.config = config
        self.dt = config.dt_initial
        self.k1: np.ndarray | None = None
        self.err_old = 1e-4
        self.n_accepted = 0
        self.n_rejected = 0

    def reset(self) -> None:
        self.k1 = None

    def error_norm(self, y: np.ndarray, y_new: np.ndarray, err: np.ndarray) -> float:
        cfg = self.config
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.sqrt(np.mean((np.abs(err) / scale) ** 2)))

    def step(self, t: float, y: np.ndarray, dt_limit: float | None = None) -> tuple[float, np.ndarray]:
        """Advance by one accepted step no longer than ``dt_limit``; returns ``(dt_used, y_new)``."""
        cfg = self.config
        if self.k1 is None:
            self.k1 = self.f(t, y)
        dt = min(self.dt, cfg.dt_max)
        clipped = dt_limit is not None and dt_limit < dt
        if clipped:
            dt = dt_limit
        while True:
            if dt < cfg.dt_min:
                raise StepSizeUnderflow(f"step size {dt:.3e} below {cfg.dt_min:.1e} at t={t}")
            with np.errstate(over="ignore", invalid="ignore"):
                y_new, err, k_new = dopri5_step(self.f, t, y, dt, self.k1)
                en = self.error_norm(y, y_new, err)
            if not np.isfinite(en):
                en = np.inf
            if en <= 1.0:
                en = max(en, 1e-10)
                fac = en ** -self.alpha * self.err_old**self.beta
                fac = min(self.fac_max, max(self.fac_min, self.safety * fac))
                self.err_old = en
                proposal = dt * fac
                # a clipped step says nothing about the natural step size
                self.dt = max(proposal, self.dt) if clipped else proposal
                self.k1 = k_new
                self.n_accepted += 1
                return dt, y_new
            self.n_rejected += 1
            fac = max(self.fac_min, self.safety * en ** -0.2) if np.isfinite(en) else self.fac_min
            dt *= fac
            self.dt = dt
            clipped = False


def integrate_to(
    f: VectorField,
    t: float,
    y: np.ndarray,
    t_target: float,
    config: IntegratorConfig,
    stepper: AdaptiveStepper | None = None,
) -> np.ndarray:
    """Integrate ``dy/dt = f(t, y)`` from ``t`` to exactly ``t_target``."""
    if config.method == "rk4":
        n = max(1, int(np.ceil((t_target - t) / config.dt_initial - 1e-9)))
        dt = (t_target - t) / n
        for i in range(n):
            y = rk4_step(f, t + i * dt, y, dt)
        return y
    stepper = stepper or AdaptiveStepper(f, config)
    while t_target - t > 1e-12 * max(1.0, abs(t_target)):
        dt, y = stepper.step(t, y, t_target - t)
        t += dt
    return y


# ---------------------------------------------------------------------------
# MCTDHF-level operations


def lowdin_orthonormalize(orbitals: np.ndarray) -> np.ndarray:
    """Symmetric orthonormalization ``S^{-1/2} b`` with ``S = b b^dagger``."""
    s = orbitals @ orbitals.conj().T
    lam, u = np.linalg.eigh(s)
    return (u * lam**-0.5) @ u.conj().T @ orbitals


def _vector_field(
    ctx: SystemContext, mode: Mode, field: float | None, energy_shift: float = 0.0
) -> VectorField:
    m, nb = ctx.n_orbitals, ctx.basis.n_points

    def f(t: float, y: np.ndarray) -> np.ndarray:
        st = WaveState.unpack(y, m, nb, t)
        db, dc = rhs(st, ctx, mode, field, energy_shift)
        return np.concatenate([db.ravel(), dc])

    return f


def step(
    state: WaveState,
    t: float,
    dt: float,
    mode: Mode,
    config: IntegratorConfig,
    ctx: SystemContext,
    field: float | None = None,
) -> tuple[WaveState, float]:
    """One accepted step from ``state`` at time ``t``; returns ``(new_state, dt_next)``.

    For the adaptive method ``dt`` is the first trial step and the accepted
    step may be shorter; the new state's ``time`` records where it landed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = _vector_field(ctx, mode, field)
    y = state.pack()
    m, nb = ctx.n_orbitals, ctx.basis.n_points
    if config.method == "rk4":
        y_new = rk4_step(f, t, y, dt)
        return WaveState.unpack(y_new, m, nb, t + dt), dt
    stepper = AdaptiveStepper(f, config)
    stepper.dt = dt
    used, y_new = stepper.step(t, y)
    return WaveState.unpack(y_new, m, nb, t + used), stepper.dt


def initial_guess(ctx: SystemContext) -> WaveState:
    """Lowest ``M`` noninteracting orbitals and the lowest determinant."""
    basis, m = ctx.basis, ctx.n_orbitals
    if m > basis.n_points:
        raise ValueError(f"M={m} exceeds basis size {basis.n_points}")
    h = basis.kinetic + np.diag(ctx.potential.values)
    try:
        _, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise IntegrationError("one-body eigensolver failed") from exc
    orbitals = np.ascontiguousarray(vecs[:, :m].T).astype(complex)
    # fix the sign so that the guess is reproducible across LAPACK builds
    for k in range(m):
        j = np.argmax(np.abs(orbitals[k]))
        if orbitals[k, j].real < 0:
            orbitals[k] *= -1
    ci = np.zeros(ctx.determinants.size, dtype=complex)
    ci[0] = 1.0
    return WaveState(orbitals, ci, 0.0)


@dataclass
class RelaxationResult:
    state: WaveState
    energy: float
    energy_history: list[tuple[int, float]]
    converged: bool
    iterations: int
    stationarity: float = float("nan")


def stationarity(state: WaveState, ctx: SystemContext) -> float:
    """Norm of the projected orbital generator plus the CI eigen-residual."""
    ints = integrals(state.orbitals, ctx)
    dens = density_matrices(state.ci, ctx.determinants)
    gb = orbital_rhs(state.orbitals, ctx, ints, dens)
    hc = ctx.determinants.hamiltonian(ints.one_body, ints.two_body) @ state.ci
    e = np.vdot(state.ci, hc)
    return float(np.linalg.norm(gb) + np.linalg.norm(hc - e * state.ci))


def imaginary_step_cap(ctx: SystemContext) -> float:
    """Largest stable explicit step for the stiffest imaginary-time mode.

    Without the cap the highest kinetic modes hover at the stability edge and
    the relaxation stalls well short of stationarity.
    """
    spread = ctx.basis.kinetic_eigenvalues()[-1] + float(np.max(np.abs(ctx.potential.values)))
    return 2.0 / spread


def relax_to_groundstate(
    initial: WaveState,
    ctx: SystemContext,
    tol_energy: float = 1e-10,
    config: IntegratorConfig = EXPLORATORY_CONFIG,
    max_steps: int = 1_000_000,
    min_steps: int = 10,
    increase_tol: float = 1e-12,
    tol_residual: float | None = None,
) -> RelaxationResult:
    """Imaginary-time relaxation until the energy changes by less than ``tol_energy`` per step.

    After each accepted step the orbitals are Loewdin-orthonormalized and the
    CI vector renormalized.  With ``tol_residual`` set, convergence also
    requires :func:`stationarity` below it (checked only once the energy
    criterion holds).
    """
    m, nb = ctx.n_orbitals, ctx.basis.n_points
    f = _vector_field(ctx, "imaginary", 0.0)
    cap = imaginary_step_cap(ctx)
    if config.dt_max > cap:
        config = replace(config, dt_max=cap, dt_initial=min(config.dt_initial, cap))
    stepper = AdaptiveStepper(f, config)
    state = initial.copy()
    state.orbitals = lowdin_orthonormalize(state.orbitals)
    state.ci = state.ci / np.linalg.norm(state.ci)
    e_prev = state_energy(state, ctx)
    history = [(0, e_prev)]
    tau = 0.0
    for it in range(1, max_steps + 1):
        y = state.pack()
        if config.method == "rk4":
            dt = config.dt_initial
            y = rk4_step(f, tau, y, dt)
        else:
            stepper.reset()
            dt, y = stepper.step(tau, y)
        tau += dt
        if not np.all(np.isfinite(y)):
            raise NumericalAbort(f"non-finite state after relaxation step {it}", state)
        new = WaveState.unpack(y, m, nb, 0.0)
        new.orbitals = lowdin_orthonormalize(new.orbitals)
        new.ci = new.ci / np.linalg.norm(new.ci)
        e = state_energy(new, ctx)
        if e - e_prev > increase_tol * max(1.0, abs(e)) and it > min_steps:
            raise IntegrationError(f"energy increased by {e - e_prev:.3e} at relaxation step {it}")
        history.append((it, e))
        state = new
        if abs(e - e_prev) < tol_energy and it >= min_steps:
            res = stationarity(state, ctx)
            if tol_residual is not None and res > tol_residual:
                e_prev = e
                continue
            logger.info("relaxation converged after %d steps, tau=%.3f, E=%.12f", it, tau, e)
            return RelaxationResult(state, e, history, True, it, res)
        e_prev = e
    raise ConvergenceError(f"no convergence after {max_steps} imaginary-time steps (E={e_prev})")


Observer = Callable[[WaveState, SystemContext], float]


@dataclass
class PropagationResult:
    state: WaveState
    times: np.ndarray
    records: dict[str, np.ndarray]
    n_steps: int = 0


def drive_realtime(
    make_rhs: Callable[[float], VectorField],
    y: np.ndarray,
    t0: float,
    t_final: float,
    pulse: FieldPulse,
    config: IntegratorConfig,
    stride: float,
    sample: Callable[[float, np.ndarray], None],
) -> tuple[np.ndarray, int]:
    """Shared real-time loop for both solvers.

    ``make_rhs(field)`` returns the vector field for a constant field value.
    Steps are cut at every multiple of ``stride`` (where ``sample`` is called)
    and at the pulse edges; the field is held at its midpoint value on each
    segment.  Returns the final vector and the number of accepted steps.
    Raises :class:`NumericalAbort` with the last finite vector as
    ``last_state`` if non-finite values appear.
    """
    if stride <= 0 or t_final < t0:
        raise ValueError("need stride > 0 and t_final >= t0")
    n_out = int(round((t_final - t0) / stride))
    out_times = {round(t0 + stride * k, 12) for k in range(n_out + 1)}
    edges = out_times | {round(t_final, 12)}
    edges |= {round(b, 12) for b in pulse.breakpoints() if t0 < b < t_final}
    edges = sorted(edges)

    t = t0
    sample(t, y)
    stepper = None
    current = None
    n_steps = 0
    for t_next in edges[1:]:
        fval = pulse(0.5 * (t + t_next))
        if stepper is None or fval != current:
            f = make_rhs(fval)
            if stepper is None:
                stepper = AdaptiveStepper(f, config)
            else:
                stepper.f = f
                stepper.reset()
            current = fval
        y_last = y
        if config.method == "rk4":
            n = max(1, int(np.ceil((t_next - t) / config.dt_initial - 1e-9)))
            h = (t_next - t) / n
            for k in range(n):
                y = rk4_step(f, t + k * h, y, h)
            n_steps += n
        else:
            while t_next - t > 1e-12 * max(1.0, abs(t_next)):
                dt, y = stepper.step(t, y, t_next - t)
                t += dt
                n_steps += 1
        t = t_next
        if not np.all(np.isfinite(y)):
            raise NumericalAbort(f"non-finite state near t={t}", y_last)
        if t in out_times:
            sample(t, y)
    return y, n_steps


def propagate_realtime(
    initial: WaveState,
    t_final: float,
    ctx: SystemContext,
    pulse: FieldPulse | None = None,
    observers: Mapping[str, Observer] | None = None,
    config: IntegratorConfig = ACCEPTANCE_CONFIG,
    stride: float = 0.1,
    energy_reference: float | None = None,
) -> PropagationResult:
    """Real-time propagation from ``initial.time`` to ``t_final``.

    Each observer ``obs(state, ctx)`` is sampled every ``stride`` a.u.

    The CI equation is integrated in a frame rotating with
    ``energy_reference`` (default: the field-free energy of ``initial``), which
    keeps the integrator from accumulating error on the trivial global phase.
    Observers and the returned state see the phase restored.
    """
    pulse = ctx.pulse if pulse is None else pulse
    observers = dict(observers or {})
    m, nb = ctx.n_orbitals, ctx.basis.n_points
    t0 = initial.time
    shift = state_energy(initial, ctx) if energy_reference is None else energy_reference

    def lab_frame(yy: np.ndarray, tt: float) -> WaveState:
        st = WaveState.unpack(yy, m, nb, tt)
        if shift:
            st.ci = st.ci * np.exp(-1j * shift * (tt - t0))
        return st

    times: list[float] = []
    records: dict[str, list[float]] = {k: [] for k in observers}

    def sample(tt: float, yy: np.ndarray) -> None:
        st = lab_frame(yy, tt)
        times.append(tt)
        for k, obs in observers.items():
            records[k].append(obs(st, ctx))

    try:
        y, n_steps = drive_realtime(
            lambda fv: _vector_field(ctx, "real", fv, shift),
            initial.pack().astype(complex),
            t0,
            t_final,
            pulse,
            config,
            stride,
            sample,
        )
    except NumericalAbort as exc:
        t_last = times[-1] if times else t0
        raise NumericalAbort(str(exc), lab_frame(exc.last_state, t_last)) from None
    return PropagationResult(
        lab_frame(y, t_final), np.array(times), {k: np.array(v) for k, v in records.items()}, n_steps
    )


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"MCTDHF1D"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIIqqqd")


def save_checkpoint(path: str | Path, state: WaveState) -> None:
    """Binary little-endian layout: magic, version, reserved, M, N_b, n_ci, time, b, C."""
    b = np.ascontiguousarray(state.orbitals, dtype="<c16")
    c = np.ascontiguousarray(state.ci, dtype="<c16")
    m, nb = b.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, 0, m, nb, c.size, float(state.time)))
        fh.write(b.tobytes())
        fh.write(c.tobytes())


def load_checkpoint(path: str | Path) -> WaveState:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: file too short for a checkpoint header")
    magic, version, _, m, nb, nc, time = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an MCTDHF checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = _HEADER.size
    expected = off + 16 * (m * nb + nc)
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated checkpoint ({len(raw)} of {expected} bytes)")
    b = np.frombuffer(raw, dtype="<c16", count=m * nb, offset=off).reshape(m, nb).astype(complex)
    c = np.frombuffer(raw, dtype="<c16", count=nc, offset=off + 16 * m * nb).astype(complex)
    return WaveState(b, c, time)
