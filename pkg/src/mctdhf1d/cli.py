"""Command-line front end.

Subcommands ``groundstate``, ``spectrum``, ``density``, ``compare`` and
``check``.  Configuration comes from an optional flat ``key = value`` file
with dotted keys (see :data:`CONFIG_KEYS`) and is overridden by flags.  The
effective configuration is echoed to ``effective.cfg`` in the output
directory and can be fed back with ``--config`` to repeat a run.

Exit codes: 0 success, 1 failed invariant check, 2 configuration error,
3 solver non-convergence, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .dvr import build_sine_dvr, soft_coulomb_interaction, soft_coulomb_potential
from .invariants import run_invariant_suite
from .mctdhf import FieldPulse, SystemContext, make_context
from .observables import (
    DipoleTrajectory,
    SpectrumResult,
    dipole_expectation,
    dipole_spectrum,
    natural_occupations,
    two_particle_density,
    write_density,
    write_spectrum,
    write_trajectory,
)
from .propagate import (
    ConvergenceError,
    IntegrationError,
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
    groundstate_2d,
    propagate_2d,
)

logger = logging.getLogger("mctdhf1d")

ENV_OUTPUT_DIR = "MCTDHF1D_OUTPUT_DIR"
SUMMARY_FILE = "summary.json"
EFFECTIVE_CONFIG_FILE = "effective.cfg"
INPUT_CONFIG_FILE = "input.cfg"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_ABORT = 4

RUNS = ("groundstate", "spectrum", "density", "compare")
SOLVERS = ("mctdhf", "tdse", "both")
TAIL_FREQUENCY = 0.75
MIN_SPECTRUM_SAMPLES = 1024


class ConfigError(ValueError):
    """Invalid configuration, optionally located by line and key."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None, source: str | None = None):
        self.message, self.line, self.key, self.source = message, line, key, source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        if key is not None:
            where += f" {key}:"
        super().__init__(f"{where} {message}".strip())


class GridMismatchError(ConfigError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters; ``None`` means "pick the default for this run"."""

    run: str = "groundstate"
    solver: str | None = None
    box: tuple[float, float] | None = None
    n_points: int | None = None
    m_orbitals: int = 2
    kick_amplitude: float = 0.01
    kick_duration: float = 0.01
    kick_start: float = 0.0
    t_final: float = 2000.0
    stride: float = 0.1
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    tol_energy: float = 1e-10
    tol_residual: float | None = 1e-9
    relax_tol: float = 1e-7
    max_steps: int = 1_000_000
    oracle_method: str = "itp"
    threshold: float = 1e-6
    correlation: bool = True
    compare_spectrum: bool = False
    output_dir: str = "mctdhf1d-out"

    @property
    def pulse(self) -> FieldPulse:
        return FieldPulse(self.kick_amplitude, self.kick_start, self.kick_duration)

    @property
    def propagation(self) -> IntegratorConfig:
        return IntegratorConfig(abs_tol=self.abs_tol, rel_tol=self.rel_tol)

    @property
    def relaxation(self) -> IntegratorConfig:
        return IntegratorConfig(abs_tol=self.relax_tol, rel_tol=self.relax_tol)

    def resolved(self) -> ExperimentConfig:
        """Fill run-dependent defaults and validate."""
        solver = self.solver
        if solver is None:
            solver = "both" if self.run in ("density", "compare") else "mctdhf"
        box, n = self.box, self.n_points
        if self.run == "spectrum":
            box = box or (-80.0, 80.0)
            n = n or 481
        elif solver == "tdse" and self.run == "groundstate":
            box = box or (-30.0, 30.0)
            n = n or 241
        else:
            box = box or (-30.0, 30.0)
            n = n or 181
        cfg = replace(self, solver=solver, box=(float(box[0]), float(box[1])), n_points=int(n))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.run not in RUNS:
            raise ConfigError(f"must be one of {', '.join(RUNS)}", key="run.kind")
        if self.solver is not None and self.solver not in SOLVERS:
            raise ConfigError(f"must be one of {', '.join(SOLVERS)}", key="run.solver")
        if self.box is not None and not self.box[0] < self.box[1]:
            raise ConfigError("need x_min < x_max", key="grid.box")
        if self.n_points is not None and self.n_points < 1:
            raise ConfigError("must be a positive integer", key="grid.n_points")
        if self.m_orbitals < 1:
            raise ConfigError("must be a positive integer", key="mctdhf.orbitals")
        if self.n_points is not None and self.m_orbitals > self.n_points:
            raise ConfigError(
                f"M={self.m_orbitals} exceeds N_b={self.n_points}", key="mctdhf.orbitals"
            )
        positive = {
            "propagation.t_final": self.t_final,
            "propagation.stride": self.stride,
            "propagation.abs_tol": self.abs_tol,
            "propagation.rel_tol": self.rel_tol,
            "groundstate.tol_energy": self.tol_energy,
            "groundstate.integrator_tol": self.relax_tol,
            "groundstate.max_steps": self.max_steps,
            "spectrum.threshold": self.threshold,
        }
        for key, value in positive.items():
            if not value > 0:
                raise ConfigError(f"must be positive, got {value}", key=key)
        if self.run == "spectrum" or (self.run == "compare" and self.compare_spectrum):
            samples = int(round(self.t_final / self.stride)) + 1
            if samples < MIN_SPECTRUM_SAMPLES:
                raise ConfigError(
                    f"{samples} dipole samples; a spectrum needs at least {MIN_SPECTRUM_SAMPLES}",
                    key="propagation.t_final",
                )
        if self.tol_residual is not None and not self.tol_residual > 0:
            raise ConfigError("must be positive or 'none'", key="groundstate.tol_residual")
        if self.kick_duration < 0:
            raise ConfigError("must be non-negative", key="pulse.duration")
        if self.oracle_method not in ("itp", "eigsh"):
            raise ConfigError("must be 'itp' or 'eigsh'", key="tdse.groundstate_method")


# ---------------------------------------------------------------------------
# configuration file


def _parse_box(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ValueError("expected two numbers 'x_min, x_max'")
    return float(parts[0]), float(parts[1])


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("none", "off") else float(text)


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError("expected an integer")
    return int(value)


# dotted key -> (field name, parser)
CONFIG_KEYS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "run.kind": ("run", str.strip),
    "run.solver": ("solver", str.strip),
    "grid.box": ("box", _parse_box),
    "grid.n_points": ("n_points", _int),
    "mctdhf.orbitals": ("m_orbitals", _int),
    "pulse.amplitude": ("kick_amplitude", float),
    "pulse.duration": ("kick_duration", float),
    "pulse.start": ("kick_start", float),
    "propagation.t_final": ("t_final", float),
    "propagation.stride": ("stride", float),
    "propagation.abs_tol": ("abs_tol", float),
    "propagation.rel_tol": ("rel_tol", float),
    "groundstate.tol_energy": ("tol_energy", float),
    "groundstate.tol_residual": ("tol_residual", _optional_float),
    "groundstate.integrator_tol": ("relax_tol", float),
    "groundstate.max_steps": ("max_steps", _int),
    "groundstate.correlation": ("correlation", _parse_bool),
    "tdse.groundstate_method": ("oracle_method", str.strip),
    "spectrum.threshold": ("threshold", float),
    "compare.spectrum": ("compare_spectrum", _parse_bool),
    "output.dir": ("output_dir", str.strip),
}
_FIELD_TO_KEY = {name: key for key, (name, _) in CONFIG_KEYS.items()}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Returns field overrides."""
    values: dict[str, Any] = {}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, source=source)
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown key", lineno, key, source)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", lineno, key, source)
        seen[key] = lineno
        name, parse = CONFIG_KEYS[key]
        try:
            values[name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"invalid value {value!r}: {exc}", lineno, key, source) from None
    try:
        ExperimentConfig(**values).validate()
    except ConfigError as exc:
        line = seen.get(exc.key or "")
        raise ConfigError(exc.message, line, exc.key, source) from None
    return values


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        key = _FIELD_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(sorted(lines)) + "\n"


# ---------------------------------------------------------------------------
# runs


def _grid(cfg: ExperimentConfig):
    basis = build_sine_dvr(cfg.box[0], cfg.box[1], cfg.n_points)
    return basis, soft_coulomb_potential(basis), soft_coulomb_interaction(basis)


def _context(cfg: ExperimentConfig, m: int | None = None) -> SystemContext:
    basis, pot, ker = _grid(cfg)
    return make_context(basis, pot, ker, cfg.m_orbitals if m is None else m)


def _grid_tag(cfg: ExperimentConfig) -> str:
    return f"N{cfg.n_points}_box{cfg.box[0]:g}_{cfg.box[1]:g}"


def _write_history(path: Path, history: list[tuple[int, float]]) -> None:
    np.savetxt(path, np.array(history, dtype=float), delimiter=",", header="step,energy", comments="", fmt="%.15g")


def _relax(cfg: ExperimentConfig, ctx: SystemContext):
    logger.info("MCTDHF relaxation: M=%d, N_b=%d", ctx.n_orbitals, ctx.basis.n_points)
    t = time.perf_counter()
    res = relax_to_groundstate(
        initial_guess(ctx),
        ctx,
        tol_energy=cfg.tol_energy,
        config=cfg.relaxation,
        max_steps=cfg.max_steps,
        tol_residual=cfg.tol_residual,
    )
    logger.info("  E=%.10f after %d steps (%.1f s)", res.energy, res.iterations, time.perf_counter() - t)
    return res


def _oracle_groundstate(cfg: ExperimentConfig, ham: Hamiltonian2D) -> tuple[float, Psi2D]:
    logger.info("2D oracle ground state: N_b=%d, method=%s", ham.n_points, cfg.oracle_method)
    t = time.perf_counter()
    e, psi = groundstate_2d(
        ham, tol=cfg.tol_energy, method=cfg.oracle_method, config=cfg.relaxation, max_steps=cfg.max_steps,
        tol_residual=cfg.tol_residual,
    )
    logger.info("  E=%.10f (%.1f s)", e, time.perf_counter() - t)
    return e, psi


def correlation_fraction(e_m: float, e_hf: float, e_exact: float) -> float:
    """Fraction of the correlation energy ``E_exact - E_HF`` recovered by ``e_m``."""
    return (e_m - e_hf) / (e_exact - e_hf)


def run_groundstate(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    report: dict[str, Any] = {}
    e_exact = None
    if cfg.solver in ("mctdhf", "both"):
        ctx = _context(cfg)
        res = _relax(cfg, ctx)
        occ = natural_occupations(res.state, ctx)
        _write_history(out / "energy_history_mctdhf.csv", res.energy_history)
        np.savetxt(out / "natural_occupations_mctdhf.txt", occ, fmt="%.15g")
        write_density(
            out / "density_mctdhf.txt", two_particle_density(res.state, ctx), ctx.basis,
            solver="mctdhf", m_orbitals=ctx.n_orbitals,
        )
        save_checkpoint(out / f"groundstate_mctdhf_M{ctx.n_orbitals}_{_grid_tag(cfg)}.chk", res.state)
        report["mctdhf"] = {
            "energy": res.energy,
            "iterations": res.iterations,
            "stationarity": res.stationarity,
            "natural_occupations": occ.tolist(),
        }
    if cfg.solver in ("tdse", "both"):
        basis, pot, ker = _grid(cfg)
        e_exact, psi = _oracle_groundstate(cfg, build_hamiltonian_2d(basis, pot, ker))
        write_density(out / "density_tdse.txt", density_2d(psi, basis), basis, solver="tdse")
        np.save(out / f"groundstate_tdse_{_grid_tag(cfg)}.npy", psi.values)
        report["tdse"] = {"energy": e_exact}
    if cfg.solver == "both":
        report["energy_gap"] = report["mctdhf"]["energy"] - e_exact

    if "mctdhf" in report:
        mc = report["mctdhf"]
        if cfg.m_orbitals == 1:
            mc["correlation_fraction"] = 0.0
        elif cfg.correlation:
            e_hf = _relax(cfg, _context(cfg, 1)).energy
            if e_exact is None:
                basis, pot, ker = _grid(cfg)
                e_exact = _oracle_groundstate(cfg, build_hamiltonian_2d(basis, pot, ker))[0]
            mc["hartree_fock_energy"] = e_hf
            mc["exact_energy"] = e_exact
            mc["correlation_fraction"] = correlation_fraction(mc["energy"], e_hf, e_exact)

    if "mctdhf" in report:
        mc = report["mctdhf"]
        print(f"E(MCTDHF, M={cfg.m_orbitals}) = {mc['energy']:.10f} Hartree")
        if "correlation_fraction" in mc:
            print(f"correlation energy recovered: {100 * mc['correlation_fraction']:.1f}%")
    if "tdse" in report:
        print(f"E(exact, 2D grid) = {report['tdse']['energy']:.10f} Hartree")
    return report


def _mctdhf_trajectory(cfg: ExperimentConfig, out: Path) -> DipoleTrajectory:
    ctx = _context(cfg)
    chk = out / f"groundstate_mctdhf_M{ctx.n_orbitals}_{_grid_tag(cfg)}.chk"
    if chk.exists():
        logger.info("using ground-state checkpoint %s", chk.name)
        state = load_checkpoint(chk)
        if state.orbitals.shape != (ctx.n_orbitals, ctx.basis.n_points):
            raise GridMismatchError(f"checkpoint {chk.name} does not match the configured grid")
    else:
        state = _relax(cfg, ctx).state
        save_checkpoint(chk, state)
    state.time = 0.0
    logger.info("MCTDHF propagation to t=%g", cfg.t_final)
    t = time.perf_counter()
    res = propagate_realtime(
        state, cfg.t_final, ctx, cfg.pulse, {"dipole": dipole_expectation}, cfg.propagation, cfg.stride
    )
    logger.info("  %d steps (%.1f s)", res.n_steps, time.perf_counter() - t)
    return DipoleTrajectory(res.times, res.records["dipole"], "mctdhf")


def _tdse_trajectory(cfg: ExperimentConfig, out: Path) -> DipoleTrajectory:
    basis, pot, ker = _grid(cfg)
    ham = build_hamiltonian_2d(basis, pot, ker)
    chk = out / f"groundstate_tdse_{_grid_tag(cfg)}.npy"
    if chk.exists():
        logger.info("using ground-state checkpoint %s", chk.name)
        values = np.load(chk)
        if values.shape != (basis.n_points, basis.n_points):
            raise GridMismatchError(f"checkpoint {chk.name} does not match the configured grid")
        psi = Psi2D(values)
    else:
        _, psi = _oracle_groundstate(cfg, ham)
        np.save(chk, psi.values)
    logger.info("2D propagation to t=%g", cfg.t_final)
    t = time.perf_counter()
    traj = propagate_2d(psi, cfg.t_final, ham, cfg.pulse, config=cfg.propagation, stride=cfg.stride)
    logger.info("  %d steps (%.1f s)", traj.n_steps, time.perf_counter() - t)
    return DipoleTrajectory(traj.times, traj.records["dipole"], "tdse")


def _spectrum_report(spec: SpectrumResult) -> dict[str, Any]:
    first = spec.first_peak()
    tail = spec.peaks_in(TAIL_FREQUENCY)
    return {
        "first_peak": None if first is None else first[0],
        "resolution": spec.resolution,
        "n_peaks": len(spec.peaks),
        "n_tail_peaks": len(tail),
        "peaks": [p[0] for p in spec.peaks[:20]],
    }


def _spectra(cfg: ExperimentConfig, out: Path, solvers: tuple[str, ...]) -> dict[str, Any]:
    report: dict[str, Any] = {}
    for solver in solvers:
        traj = _mctdhf_trajectory(cfg, out) if solver == "mctdhf" else _tdse_trajectory(cfg, out)
        spec = dipole_spectrum(traj, threshold=cfg.threshold, min_samples=MIN_SPECTRUM_SAMPLES)
        write_trajectory(out / f"trajectory_{solver}.csv", traj)
        write_spectrum(out / f"spectrum_{solver}.csv", spec)
        np.savetxt(
            out / f"peaks_{solver}.csv", np.array(spec.peaks).reshape(-1, 2), delimiter=",",
            header="omega,amplitude", comments="", fmt="%.15g",
        )
        report[solver] = _spectrum_report(spec)
        first = report[solver]["first_peak"]
        label = f"MCTDHF M={cfg.m_orbitals}" if solver == "mctdhf" else "exact"
        print(f"first peak ({label}): " + ("none" if first is None else f"{first:.4f} a.u."))
    return report


def _solvers(cfg: ExperimentConfig) -> tuple[str, ...]:
    return ("mctdhf", "tdse") if cfg.solver == "both" else (cfg.solver,)


def run_spectrum(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    return _spectra(cfg, out, _solvers(cfg))


def run_density(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    report = run_groundstate(replace(cfg, correlation=False), out)
    if cfg.solver == "both":
        dev = _density_deviation(out)
        report["max_density_deviation"] = dev
        print(f"max |rho2(MCTDHF) - |psi|^2| = {dev:.3e}")
    return report


def _density_deviation(out: Path) -> float:
    a = np.loadtxt(out / "density_mctdhf.txt", ndmin=2)
    b = np.loadtxt(out / "density_tdse.txt", ndmin=2)
    if a.shape != b.shape:
        raise GridMismatchError(f"density grids differ: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))


def run_compare(cfg: ExperimentConfig, out: Path) -> dict[str, Any]:
    cfg = replace(cfg, solver="both")
    gs = run_groundstate(replace(cfg, correlation=False), out)
    report: dict[str, Any] = {
        "energy_mctdhf": gs["mctdhf"]["energy"],
        "energy_exact": gs["tdse"]["energy"],
        "energy_gap": gs["energy_gap"],
        "max_density_deviation": _density_deviation(out),
    }
    if cfg.compare_spectrum:
        spec = _spectra(cfg, out, ("mctdhf", "tdse"))
        report["spectra"] = spec
        a, b = spec["mctdhf"]["first_peak"], spec["tdse"]["first_peak"]
        report["first_peak_deviation"] = None if a is None or b is None else a - b
    (out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"energy gap = {report['energy_gap']:.3e} Hartree")
    print(f"max density deviation = {report['max_density_deviation']:.3e}")
    return report


def run_check() -> tuple[bool, list[dict[str, Any]]]:
    results = run_invariant_suite()
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all invariants hold" if ok else "invariant check FAILED")
    return ok, [{"name": r.name, "defect": r.defect, "bound": r.bound, "passed": r.passed} for r in results]


RUNNERS = {
    "groundstate": run_groundstate,
    "spectrum": run_spectrum,
    "density": run_density,
    "compare": run_compare,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mctdhf1d", description="MCTDHF and exact grid solvers for the 1D soft-Coulomb helium model."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*RUNS, "check"):
        p = sub.add_parser(name)
        p.add_argument("--out", help=f"output directory (also ${ENV_OUTPUT_DIR})")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "check":
            continue
        p.add_argument("--config", type=Path, help="flat key = value configuration file")
        p.add_argument("--box", nargs=2, type=float, metavar=("X_MIN", "X_MAX"))
        p.add_argument("--npoints", type=int)
        p.add_argument("--orbitals", type=int)
        p.add_argument("--solver", choices=SOLVERS)
        p.add_argument("--tfinal", type=float)
        p.add_argument("--kick-amplitude", type=float)
        p.add_argument("--kick-duration", type=float)
        p.add_argument("--tol-energy", type=float)
    return parser


def config_from_args(args: argparse.Namespace) -> tuple[ExperimentConfig, str | None]:
    """Defaults < config file < environment (output dir only) < flags."""
    values: dict[str, Any] = {}
    text = None
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc.strerror}", source=str(args.config)) from None
        values.update(parse_config_text(text, str(args.config)))
    values["run"] = args.command
    if os.environ.get(ENV_OUTPUT_DIR):
        values["output_dir"] = os.environ[ENV_OUTPUT_DIR]
    flags = {
        "box": "box",
        "npoints": "n_points",
        "orbitals": "m_orbitals",
        "solver": "solver",
        "tfinal": "t_final",
        "kick_amplitude": "kick_amplitude",
        "kick_duration": "kick_duration",
        "tol_energy": "tol_energy",
        "out": "output_dir",
    }
    for flag, name in flags.items():
        value = getattr(args, flag)
        if value is not None:
            values[name] = tuple(value) if flag == "box" else value
    return ExperimentConfig(**values).resolved(), text


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(type(obj).__name__)


def _write_summary(out: Path, summary: dict[str, Any]) -> None:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    text = json.dumps(clean(summary), indent=2, sort_keys=True, default=_json_default)
    (out / SUMMARY_FILE).write_text(text + "\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )

    if args.command == "check":
        ok, results = run_check()
        out_dir = args.out or os.environ.get(ENV_OUTPUT_DIR)
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            _write_summary(out, {"run": "check", "status": "ok" if ok else "failed", "checks": results})
        return EXIT_OK if ok else EXIT_CHECK_FAILED

    try:
        cfg, text = config_from_args(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if text is not None:
        (out / INPUT_CONFIG_FILE).write_text(text)
    (out / EFFECTIVE_CONFIG_FILE).write_text(format_config(cfg))
    summary: dict[str, Any] = {"run": cfg.run, "config": asdict(cfg)}

    code = EXIT_OK
    try:
        summary["results"] = RUNNERS[cfg.run](cfg, out)
        summary["status"] = "ok"
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        summary.update(status="config_error", error=str(exc))
        code = EXIT_CONFIG
    except ConvergenceError as exc:
        logger.error("solver did not converge: %s", exc)
        summary.update(status="not_converged", error=str(exc))
        code = EXIT_NONCONVERGED
    except (NumericalAbort, IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        logger.error("numerical abort: %s", exc)
        summary.update(status="numerical_abort", error=str(exc))
        code = EXIT_ABORT
    _write_summary(out, summary)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
