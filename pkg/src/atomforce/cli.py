"""Command-line front end: ``atomforce <command> --config FILE --output FILE``.

Exit status: 0 success, 1 failed validation checks, 2 configuration error,
3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bloch, contfrac, floquet, scenarios
from .errors import (
    AtomForceError,
    ConfigError,
    ConsistencyError,
    ContinuedFractionError,
    ConvergenceError,
    InvalidArgumentError,
    NumericalInstabilityError,
    OutOfWindowError,
    RecurrenceInstabilityError,
)
from .field import DEFAULT_MAX_DEN, AtomParams, FieldConfig, PlaneWave
from .lattice import rationalize

log = logging.getLogger("atomforce")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4
COMMANDS = ("force", "spectrum", "sweep", "oracle", "validate")
SOLVER_ERRORS = (ConvergenceError, ConsistencyError, ContinuedFractionError,
                 RecurrenceInstabilityError, NumericalInstabilityError)


@dataclass
class RunSpec:
    command: str
    config_path: Path
    output_path: Path | None = None
    overrides: dict = field(default_factory=dict)
    tolerances: tuple = (floquet.DEFAULT_RTOL, floquet.DEFAULT_ATOL)
    sweep: tuple | None = None  # (axis, v_min, v_max, n_points)
    spectrum_n_max: int | None = None
    seed: int | None = None
    solver: str = "auto"
    force_units: str = "gamma"
    plot: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if self.sweep is not None:
            _, v_min, v_max, n_points = self.sweep
            if n_points < 2 or not v_min < v_max:
                raise ConfigError("--vrange", "need min < max and at least 2 points")
        if self.force_units not in ("gamma", "half-gamma"):
            raise ConfigError("--force-units", f"unknown unit {self.force_units!r}")


# -- configuration -----------------------------------------------------------

def _rational(value, key, max_den):
    if isinstance(value, bool):
        raise ConfigError(key, "expected a number")
    if isinstance(value, dict):
        if set(value) != {"num", "den"}:
            raise ConfigError(key, "rational must have exactly the keys 'num' and 'den'")
        num, den = value["num"], value["den"]
        if not (isinstance(num, int) and isinstance(den, int)) or isinstance(num, bool):
            raise ConfigError(key, "'num' and 'den' must be integers")
        if den <= 0:
            raise ConfigError(key + ".den", "must be a positive integer")
        return Fraction(num, den)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        return rationalize(value, max_den)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(key, f"cannot parse {value!r} as a rational") from None
    raise ConfigError(key, f"expected a number or {{'num', 'den'}}, got {type(value).__name__}")


def _number(doc, key, path, default=None):
    if key not in doc:
        if default is None:
            raise ConfigError(f"{path}{key}", "missing required key")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}{key}", "expected a number")
    if not math.isfinite(value):
        raise ConfigError(f"{path}{key}", "must be finite")
    return float(value)


def apply_overrides(doc: dict, overrides: dict) -> dict:
    """Set dotted keys (``lasers.0.rabi``) in a parsed config document."""
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = doc
        try:
            for part in parts[:-1]:
                node = node[int(part)] if isinstance(node, list) else node[part]
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)] = value
            else:
                node[last] = value
        except (KeyError, IndexError, ValueError, TypeError):
            raise ConfigError(dotted, "override path does not exist") from None
    return doc


def config_from_dict(doc) -> FieldConfig:
    if not isinstance(doc, dict):
        raise ConfigError("", "config document must be a JSON object")
    unknown = set(doc) - {"gamma", "max_den", "weights", "lasers"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    gamma = _number(doc, "gamma", "", 1.0)
    if gamma <= 0:
        raise ConfigError("gamma", "must be positive")
    max_den = doc.get("max_den", DEFAULT_MAX_DEN)
    if isinstance(max_den, bool) or not isinstance(max_den, int) or max_den < 1:
        raise ConfigError("max_den", "must be a positive integer")
    lasers = doc.get("lasers")
    if not isinstance(lasers, list) or not lasers:
        raise ConfigError("lasers", "must be a non-empty list")
    waves = []
    for i, laser in enumerate(lasers):
        path = f"lasers[{i}]."
        if not isinstance(laser, dict):
            raise ConfigError(f"lasers[{i}]", "must be an object")
        unknown = set(laser) - {"rabi", "phase", "detuning", "k"}
        if unknown:
            raise ConfigError(path + sorted(unknown)[0], "unknown key")
        rabi = _number(laser, "rabi", path)
        if rabi < 0:
            raise ConfigError(path + "rabi", "must be >= 0")
        phase = _number(laser, "phase", path, 0.0)
        if "detuning" not in laser:
            raise ConfigError(path + "detuning", "missing required key")
        detuning = _rational(laser["detuning"], path + "detuning", max_den)
        k = laser.get("k", [1.0, 0.0, 0.0])
        if (not isinstance(k, list) or len(k) != 3
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in k)):
            raise ConfigError(path + "k", "must be a list of 3 numbers")
        waves.append(PlaneWave(rabi, detuning, phase, tuple(float(c) for c in k)))
    weights = doc.get("weights", "equal")
    if weights == "equal":
        weights = None
    elif isinstance(weights, list):
        if len(weights) != len(waves):
            raise ConfigError("weights", f"expected {len(waves)} entries, got {len(weights)}")
        weights = [_rational(w, f"weights[{i}]", max_den) for i, w in enumerate(weights)]
        if any(w < 0 for w in weights) or sum(weights) != 1:
            raise ConfigError("weights", "must be nonnegative and sum to 1")
    else:
        raise ConfigError("weights", "must be 'equal' or a list of rationals")
    return FieldConfig(waves, AtomParams(gamma), weights, max_den)


def parse_config(path, overrides: dict | None = None) -> FieldConfig:
    """Read and validate a JSON configuration file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON in {path}: {exc}") from None
    if overrides:
        doc = apply_overrides(doc, overrides)
    return config_from_dict(doc)


# -- output ------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


# -- commands ----------------------------------------------------------------

def _force_scale(spec: RunSpec) -> float:
    return 2.0 if spec.force_units == "half-gamma" else 1.0


def _cmd_force(spec, config):
    rtol, atol = spec.tolerances
    _, res = scenarios.solve_config(config, spec.solver, rtol, atol)
    scale = _force_scale(spec)
    n = config.n_waves
    header = ([f"F{j}_{c}" for j in range(n) for c in "xyz"] + ["F_x", "F_y", "F_z"]
              + [f"R{j}" for j in range(n)] + [f"s{j}" for j in range(n)] + ["s_eff", "w0"])
    row = (list(scale * res.F_bar.ravel()) + list(scale * res.F_total) + list(res.R_bar)
           + list(res.s_j) + [res.s_eff, res.w0])
    write_csv(spec.output_path, header, [row])
    return EXIT_OK


def _cmd_spectrum(spec, config):
    rtol, atol = spec.tolerances
    sol, _ = scenarios.solve_config(config, spec.solver, rtol, atol)
    n_max = spec.spectrum_n_max
    if n_max is None:
        n_max = min(sol.n_window, 10 * sol.g)
    res = floquet.rate_and_force_spectrum(sol, config, config.lattice(), n_max)
    rows = [(j, int(n), res.spectrum_R[i, j].real, res.spectrum_R[i, j].imag)
            for j in range(config.n_waves) for i, n in enumerate(res.spectrum_n)]
    write_csv(spec.output_path, ["wave", "n", "re_R", "im_R"], rows)
    if spec.plot:
        from .plotting import plot_spectrum

        plot_spectrum(res, spec.output_path.with_suffix(".png"))
    return EXIT_OK


def _cmd_sweep(spec, config):
    rtol, atol = spec.tolerances
    axis, v_min, v_max, n_points = spec.sweep or ((1.0, 0.0, 0.0), -15.0, 15.0, 301)
    vel = scenarios.axis_velocities(axis, v_min, v_max, n_points)
    res = scenarios.velocity_sweep(config, vel, spec.solver, rtol, atol)
    scale = _force_scale(spec)
    n = config.n_waves
    header = ["vx", "vy", "vz", "Fx", "Fy", "Fz"] + [f"R{j}" for j in range(n)] + ["converged"]
    rows = [list(res.velocities[i]) + list(scale * res.forces[i]) + list(res.rates[i])
            + [bool(res.converged[i])] for i in range(len(vel))]
    write_csv(spec.output_path, header, rows)
    for msg in res.messages:
        log.warning("%s", msg)
    if spec.plot:
        from .plotting import plot_sweep

        label = r"$F$ [$\hbar k\Gamma/2$]" if scale == 2.0 else r"$F$ [$\hbar k\Gamma$]"
        plot_sweep(res, spec.output_path.with_suffix(".png"), axis, scale, label)
    if not res.converged.all():
        log.error("%d of %d sweep rows did not converge", (~res.converged).sum(), len(vel))
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_oracle(spec, config):
    rtol, atol = spec.tolerances
    _, res = scenarios.solve_config(config, spec.solver, rtol, atol)
    td = bloch.periodic_average_rates(config)
    rows = [(j, td.R_bar[j], res.R_bar[j], abs(td.R_bar[j] - res.R_bar[j]))
            for j in range(config.n_waves)]
    write_csv(spec.output_path, ["wave", "R_time_domain", "R_harmonic", "abs_diff"], rows)
    return EXIT_OK


def validation_checks(config: FieldConfig, rtol=floquet.DEFAULT_RTOL, atol=floquet.DEFAULT_ATOL,
                      seed: int | None = None, solver: str = "auto"):
    """Cross-checks of one configuration: ``[(name, value, tolerance, passed)]``.

    ``value`` is the discrepancy measured by the check.
    """
    lattice = config.lattice()
    sol = floquet.solve_adaptive(config, lattice, rtol, atol)
    res = floquet.mean_forces(sol, config)
    gamma = config.gamma
    checks = []

    def add(name, value, tol):
        checks.append((name, float(value), tol, bool(value <= tol)))

    if len(set(config.detunings)) == 1:
        ref = scenarios.closed_form_reference(
            "monochromatic", omegas=config.omegas, detuning=float(config.detunings[0]),
            gamma=gamma)
        add("closed_form_s_j", np.max(np.abs(res.s_j - ref["s"])), 1e-10)
    elif config.total_rabi <= 0.05:
        ref = scenarios.closed_form_reference(
            "rate_equation", rabi=[w.rabi for w in config.waves],
            detuning=[float(d) for d in config.detunings], gamma=gamma)
        add("low_intensity_s_j", np.max(np.abs(res.s_j - ref["s"])),
            8 * config.total_rabi ** 3)
    add("photon_balance", abs(res.R_bar.sum() - gamma * (sol.w0 + 0.5)), 1e-10)
    add("w0_range", 0.0 if -0.5 <= sol.w0 < 0 else abs(sol.w0), 0.0)
    sym = max(np.max(np.abs(x - np.conj(x[::-1]))) for x in (sol.w, sol.r, sol.u, sol.v))
    add("conjugate_symmetry", sym, 1e-12)
    td = bloch.periodic_average_rates(config, lattice)
    add("time_domain_oracle", np.max(np.abs(td.R_bar - res.R_bar)), 1e-4 * gamma)
    if config.n_waves == 2 and config.detunings[0] != config.detunings[1]:
        cf_sol, cf_res = contfrac.solve_pair(config, rtol, atol)
        g = lattice.g
        add("contfrac_forces", np.max(np.abs(cf_res.F_bar - res.F_bar))
            / max(1.0, np.max(np.abs(res.F_bar))), 1e-8)
        add("contfrac_r_ns", abs(cf_sol.r_at(g) - sol.r_at(g)), 1e-8)
    exps = bloch.floquet_exponents(config, lattice)
    re = exps.real
    add("floquet_exponent_bound",
        max(0.0, np.max(re) + gamma / 2, -gamma - np.min(re)), 1e-6)
    shift = float(np.random.default_rng(seed).uniform(0, 2 * math.pi))
    shifted = floquet.mean_forces(floquet.solve_adaptive(config.shift_phases(shift), lattice,
                                                         rtol, atol), config)
    add("global_phase_invariance", np.max(np.abs(shifted.F_bar - res.F_bar)), 1e-12)
    return checks


def _cmd_validate(spec, config):
    rtol, atol = spec.tolerances
    checks = validation_checks(config, rtol, atol, spec.seed, spec.solver)
    width = max(len(c[0]) for c in checks)
    for name, value, tol, ok in checks:
        print(f"{name:<{width}}  {value:10.3e}  tol {tol:8.1e}  {'PASS' if ok else 'FAIL'}")
    if spec.output_path is not None:
        write_csv(spec.output_path, ["check", "value", "tolerance", "passed"], checks)
    return EXIT_OK if all(c[3] for c in checks) else EXIT_CHECKS


_DISPATCH = {"force": _cmd_force, "spectrum": _cmd_spectrum, "sweep": _cmd_sweep,
             "oracle": _cmd_oracle, "validate": _cmd_validate}


def run(spec: RunSpec) -> int:
    """Execute one command; returns the process exit status."""
    try:
        config = parse_config(spec.config_path, spec.overrides)
        if spec.output_path is None and spec.command != "validate":
            raise ConfigError("--output", "required for this command")
        return _DISPATCH[spec.command](spec, config)
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except InvalidArgumentError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OutOfWindowError as exc:
        log.error("configuration error: --nmax: %s", exc)
        return EXIT_CONFIG
    except SOLVER_ERRORS as exc:
        history = getattr(exc, "history", None)
        log.error("solver failure: %s%s", exc, f" (history: {history})" if history else "")
        return EXIT_SOLVER
    except AtomForceError as exc:
        log.error("error: %s", exc)
        return EXIT_SOLVER


# -- argument parsing --------------------------------------------------------

def _floats(text, n, name):
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name}: expected {n} comma-separated numbers")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"{name}: expected {n} comma-separated numbers")
    return parts


def _override(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="atomforce",
        description="Mean light force on a two-level atom driven by several plane waves.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="JSON field configuration")
    p.add_argument("--output", type=Path, help="CSV output path")
    p.add_argument("--rtol", type=float, default=floquet.DEFAULT_RTOL)
    p.add_argument("--atol", type=float, default=floquet.DEFAULT_ATOL)
    p.add_argument("--axis", type=lambda s: _floats(s, 3, "--axis"), default=[1.0, 0.0, 0.0])
    p.add_argument("--vrange", type=lambda s: _floats(s, 3, "--vrange"),
                   default=[-15.0, 15.0, 301], help="MIN,MAX,N velocity grid (units gamma/k)")
    p.add_argument("--nmax", type=int, help="highest harmonic in spectrum output")
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=scenarios.SOLVERS, default="auto")
    p.add_argument("--force-units", choices=("gamma", "half-gamma"), default="gamma")
    p.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                   metavar="KEY=VALUE", help="override a config entry, e.g. lasers.0.rabi=2")
    p.add_argument("--plot", action="store_true", help="also write a PNG figure")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="atomforce: %(levelname)s: %(message)s")
    try:
        v_min, v_max, n = args.vrange
        if n != int(n):
            raise ConfigError("--vrange", "point count must be an integer")
        spec = RunSpec(args.command, args.config, args.output, dict(args.overrides),
                       (args.rtol, args.atol), (tuple(args.axis), v_min, v_max, int(n)),
                       args.nmax, args.seed, args.solver, args.force_units, args.plot)
    except InvalidArgumentError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
