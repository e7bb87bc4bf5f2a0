"""Named field configurations, velocity sweeps, phase averaging, closed forms."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import contfrac, floquet
from .errors import AtomForceError, InvalidArgumentError, UnsupportedError
from .field import AtomParams, FieldConfig, PlaneWave
from .lattice import doppler_shift

log = logging.getLogger(__name__)

MAX_HARMONIC = 1000
SOLVERS = ("auto", "matrix", "contfrac")


def _unit(direction) -> tuple:
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if d.shape != (3,) or not norm > 0:
        raise InvalidArgumentError(f"direction must be a nonzero 3-vector, got {direction!r}")
    return tuple(d / norm)


def preset(kind: str, **params) -> FieldConfig:
    """Build one of the standard configurations.

    ``single``: ``rabi``, ``detuning``, ``direction``, ``phase``.
    ``counterprop_pair``: ``rabi1``, ``rabi2``, ``detuning``, ``delta_phi``,
    ``direction``; the second wave counterpropagates with phase ``delta_phi``.
    ``bichromatic_four_wave``: ``detuning`` (default 10), ``rabi`` (default
    ``sqrt(3/2) * detuning``), ``shifted_wave`` (default 2, the first
    counterpropagating wave), ``shift`` (default ``pi/2``), ``direction``.
    """
    gamma = params.pop("gamma", 1.0)
    max_den = params.pop("max_den", 4096)
    k = np.array(_unit(params.pop("direction", (1.0, 0.0, 0.0))))
    try:
        if kind == "single":
            waves = [PlaneWave(params.pop("rabi"), params.pop("detuning", 0),
                               params.pop("phase", 0.0), tuple(k))]
        elif kind == "counterprop_pair":
            det = params.pop("detuning", 0)
            r1 = params.pop("rabi1")
            r2 = params.pop("rabi2", r1)
            waves = [PlaneWave(r1, det, 0.0, tuple(k)),
                     PlaneWave(r2, det, params.pop("delta_phi", 0.0), tuple(-k))]
        elif kind == "bichromatic_four_wave":
            det = params.pop("detuning", 10)
            rabi = params.pop("rabi", math.sqrt(1.5) * float(det))
            shifted = params.pop("shifted_wave", 2)
            shift = params.pop("shift", math.pi / 2)
            if shifted not in range(4):
                raise InvalidArgumentError(f"shifted_wave must be 0..3, got {shifted!r}")
            dirs = (k, k, -k, -k)
            dets = (det, -det, det, -det)
            waves = [PlaneWave(rabi, dets[i], shift if i == shifted else 0.0, tuple(dirs[i]))
                     for i in range(4)]
        else:
            raise InvalidArgumentError(f"unknown preset kind {kind!r}")
    except KeyError as exc:
        raise InvalidArgumentError(f"preset {kind!r} requires parameter {exc.args[0]!r}")
    if params:
        raise InvalidArgumentError(f"unexpected parameters for {kind!r}: {sorted(params)}")
    return FieldConfig(waves, AtomParams(gamma), max_den=max_den)


def saturation(rabi, detuning, gamma=1.0):
    """Standard single-wave saturation parameter."""
    return (rabi ** 2 / 2) / (detuning ** 2 + gamma ** 2 / 4)


def closed_form_reference(kind: str, **params):
    """Textbook force and saturation formulas used as test oracles.

    Forces are scalar projections on the first wave's direction, in units of
    ``hbar k gamma``.
    """
    gamma = params.get("gamma", 1.0)
    if kind == "single":
        s = saturation(params["rabi"], params["detuning"], gamma)
        return {"s": s, "R": gamma / 2 * s / (1 + s), "F": gamma / 2 * s / (1 + s)}
    if kind == "saturation_limit":
        return {"F": gamma / 2}
    if kind == "rate_equation":
        s = np.array([saturation(r, d, gamma)
                      for r, d in zip(params["rabi"], params["detuning"])])
        return {"s": s, "R": gamma / 2 * s / (1 + s.sum())}
    if kind == "monochromatic":
        omegas = np.asarray(params["omegas"], dtype=complex)
        delta = params["detuning"]
        s = (omegas / (gamma / 2 - 1j * delta) * np.conj(omegas.sum()) / gamma).real
        return {"s": s, "R": gamma / 2 * s / (1 + s.sum())}
    if kind == "counterprop":
        s1, s2 = params["s1"], params["s2"]
        return {"F": gamma / 2 * (s1 - s2) / (1 + s1 + s2)}
    if kind == "dipole":
        rabi, delta, dphi = params["rabi"], params["detuning"], params["delta_phi"]
        num = 4 * rabi ** 2 * delta * math.sin(dphi)
        den = gamma ** 2 + 4 * delta ** 2 + 8 * rabi ** 2 * math.cos(dphi / 2) ** 2
        return {"F": num / den}
    raise UnsupportedError(f"no closed form for {kind!r}")


def _pick_solver(config: FieldConfig, solver: str) -> str:
    if solver not in SOLVERS:
        raise InvalidArgumentError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    two_tone = config.n_waves == 2 and config.detunings[0] != config.detunings[1]
    if solver == "contfrac" and not two_tone:
        raise InvalidArgumentError("contfrac solver needs two waves of distinct frequency")
    if solver == "auto":
        return "contfrac" if two_tone else "matrix"
    return solver


def solve_config(config: FieldConfig, solver: str = "auto",
                 rtol: float = floquet.DEFAULT_RTOL, atol: float = floquet.DEFAULT_ATOL,
                 n_max: int | None = None):
    """Solve one configuration; returns ``(FourierSolution, ForceResult)``.

    With ``solver="auto"`` a failing two-wave fast path falls back to the
    matrix solver.  ``n_max`` requests rate harmonics up to that order.
    """
    method = _pick_solver(config, solver)
    if method == "contfrac":
        try:
            sol, forces = contfrac.solve_pair(config, rtol, atol)
            if n_max is not None:
                forces = floquet.rate_and_force_spectrum(sol, config, config.lattice(), n_max)
            elif forces.spectrum_n is not None:
                forces = floquet.mean_forces(sol, config)
            return sol, forces
        except AtomForceError:
            if solver != "auto":
                raise
            log.info("continued-fraction path failed; using matrix solver")
    lattice = config.lattice()
    sol = floquet.solve_adaptive(config, lattice, rtol, atol)
    if n_max is not None:
        return sol, floquet.rate_and_force_spectrum(sol, config, lattice, n_max)
    return sol, floquet.mean_forces(sol, config)


def compute_forces(config: FieldConfig, solver: str = "auto", **kw) -> floquet.ForceResult:
    return solve_config(config, solver, **kw)[1]


@dataclass
class SweepResult:
    velocities: np.ndarray
    forces: np.ndarray
    rates: np.ndarray
    converged: np.ndarray
    messages: list = field(default_factory=list)


def _threads() -> int:
    raw = os.environ.get("ATOMFORCE_THREADS", "").strip()
    n = int(raw) if raw else 0
    return n if n > 0 else (os.cpu_count() or 1)


def _sweep_row(config, v, solver, rtol, atol):
    shifted = doppler_shift(config, v)
    lat = shifted.lattice()
    nan = np.full(3, np.nan), np.full(config.n_waves, np.nan)
    if lat.max_abs_m > MAX_HARMONIC:
        return (*nan, False, f"v={tuple(v)}: harmonic index {lat.max_abs_m} > {MAX_HARMONIC}")
    try:
        _, res = solve_config(shifted, solver, rtol, atol)
    except AtomForceError as exc:
        return (*nan, False, f"v={tuple(v)}: {exc}")
    return res.F_total, res.R_bar, True, ""


def velocity_sweep(config: FieldConfig, velocities: Sequence, solver: str = "auto",
                   rtol: float = floquet.DEFAULT_RTOL, atol: float = floquet.DEFAULT_ATOL,
                   threads: int | None = None) -> SweepResult:
    """Mean force at each velocity, solving the Doppler-shifted problem per row.

    Failed or pathological rows are flagged in ``converged`` and the sweep
    continues.  Row order always follows ``velocities``.
    """
    vel = np.asarray(velocities, dtype=float)
    if vel.ndim != 2 or vel.shape[1] != 3 or not np.all(np.isfinite(vel)):
        raise InvalidArgumentError("velocities must be a finite (n, 3) array")
    _pick_solver(config, solver)
    n_threads = threads or _threads()
    job = lambda v: _sweep_row(config, v, solver, rtol, atol)  # noqa: E731
    if n_threads > 1 and len(vel) > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            rows = list(pool.map(job, vel))
    else:
        rows = [job(v) for v in vel]
    forces = np.array([r[0] for r in rows])
    rates = np.array([r[1] for r in rows]).reshape(len(vel), config.n_waves)
    ok = np.array([r[2] for r in rows], dtype=bool)
    return SweepResult(vel, forces.reshape(len(vel), 3), rates, ok, [r[3] for r in rows if r[3]])


def axis_velocities(axis, v_min: float, v_max: float, n_points: int) -> np.ndarray:
    if n_points < 2 or not v_min < v_max:
        raise InvalidArgumentError("need n_points >= 2 and v_min < v_max")
    # "+ 0.0" turns the -0.0 entries of off-axis components into 0.0
    return np.outer(np.linspace(v_min, v_max, n_points), _unit(axis)) + 0.0


@dataclass(frozen=True)
class PhaseAverage:
    n_samples: int
    s_mean: np.ndarray
    s_err: np.ndarray
    R_mean: np.ndarray
    R_err: np.ndarray
    F_mean: np.ndarray
    F_err: np.ndarray


def phase_average(config: FieldConfig, n_samples: int, seed: int = 0,
                  solver: str = "auto", **kw) -> PhaseAverage:
    """Monte Carlo average over independent uniform phases of every wave."""
    if n_samples < 1:
        raise InvalidArgumentError(f"n_samples must be >= 1, got {n_samples!r}")
    rng = np.random.default_rng(seed)
    s, R, F = [], [], []
    for _ in range(n_samples):
        phases = rng.uniform(0.0, 2 * math.pi, config.n_waves)
        cfg = config.with_waves(
            PlaneWave(w.rabi, w.detuning, p, w.k) for w, p in zip(config.waves, phases))
        try:
            res = compute_forces(cfg, solver, **kw)
        except AtomForceError as exc:
            raise type(exc)(f"phase sample {phases.tolist()} failed: {exc}") from exc
        s.append(res.s_j)
        R.append(res.R_bar)
        F.append(res.F_bar)

    def stats(x):
        x = np.asarray(x)
        err = x.std(axis=0, ddof=1) / math.sqrt(len(x)) if len(x) > 1 else np.zeros(x.shape[1:])
        return x.mean(axis=0), err

    return PhaseAverage(n_samples, *stats(s), *stats(R), *stats(F))


def regression_configs() -> dict:
    """Fixed set of configurations exercised by the invariant checks."""
    rng = np.random.default_rng(20170217)
    out = {
        "single_resonant": preset("single", rabi=1.0, detuning=0),
        "single_red": preset("single", rabi=2.0, detuning=Fraction(-3, 2)),
        "standing_wave": preset("counterprop_pair", rabi1=1.0, detuning=1,
                                delta_phi=math.pi / 3),
        "unequal_counterprop": preset("counterprop_pair", rabi1=1.5, rabi2=0.7,
                                      detuning=-2, delta_phi=1.0),
        "bichromatic_v0": preset("bichromatic_four_wave", detuning=10),
        "bichromatic_v1": doppler_shift(preset("bichromatic_four_wave", detuning=10),
                                        (1.0, 0.0, 0.0)),
        "bichromatic_weak": doppler_shift(preset("bichromatic_four_wave", detuning=3, rabi=2.0),
                                          (0.5, 0.0, 0.0)),
        "two_tone_weighted": FieldConfig(
            [PlaneWave(3.0, 2, 0.4, (1, 0, 0)), PlaneWave(2.0, -1, 1.1, (0, 1, 0))],
            weights=(Fraction(1, 3), Fraction(2, 3))),
    }
    for i in range(4):
        n = int(rng.integers(2, 5))
        dets = [Fraction(int(rng.integers(-12, 13)), int(rng.integers(1, 3))) for _ in range(n)]
        waves = [PlaneWave(float(rng.uniform(0.2, 6.0)), d, float(rng.uniform(0, 2 * math.pi)),
                           tuple(rng.normal(size=3))) for d in dets]
        out[f"random_{i}"] = FieldConfig(waves)
    return out
