"""Optical Bloch equations in the time domain.

The Bloch vector is ``x = (u, v, w)`` with ``u + i v`` the rotating-frame
ground/excited coherence and ``w = rho_ee - 1/2``.  It obeys
``dx/dt = A(t) x + b`` with ``b = (0, 0, -gamma/2)`` and a drive envelope that
is periodic on the frequency lattice.  The fixed-step RK4 integrator here is
the brute-force oracle for the harmonic-balance solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericalInstabilityError
from .field import AtomParams, FieldConfig, PlaneWave  # noqa: F401  (re-export)
from .lattice import FrequencyLattice

PURITY_TOL = 1e-6
GROUND_STATE = (0.0, 0.0, -0.5)


@dataclass(frozen=True)
class BlochState:
    u: float
    v: float
    w: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])

    @property
    def purity(self) -> float:
        """``u^2 + v^2 + w^2``; at most 1/4 for a physical state."""
        return self.u * self.u + self.v * self.v + self.w * self.w


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 3)

    @property
    def final(self) -> BlochState:
        return BlochState(*self.states[-1])


@dataclass(frozen=True)
class PeriodAverage:
    """Time averages over one period of the asymptotic regime."""

    R_bar: np.ndarray
    u_bar: float
    v_bar: float
    w_bar: float
    period: float
    step: float


def rabi_envelope(config: FieldConfig, lattice: FrequencyLattice, t):
    """``Omega(t) = sum_j Omega_j exp(i m_j omega_c t)``; vectorized over ``t``."""
    t = np.asarray(t, dtype=float)
    wc = float(lattice.omega_c)
    phases = np.multiply.outer(t, lattice.m_array * wc)
    env = np.exp(1j * phases) @ config.omegas
    return complex(env) if env.ndim == 0 else env


def _matrix(gamma, delta_bar, omega):
    re, im = omega.real, omega.imag
    return np.array([
        [-gamma / 2, delta_bar, im],
        [-delta_bar, -gamma / 2, -re],
        [-im, re, -gamma],
    ])


def obe_rhs(state, t: float, config: FieldConfig, lattice: FrequencyLattice) -> np.ndarray:
    x = state.as_array() if isinstance(state, BlochState) else np.asarray(state, dtype=float)
    gamma = config.gamma
    a = _matrix(gamma, float(lattice.delta_bar), rabi_envelope(config, lattice, t))
    return a @ x + np.array([0.0, 0.0, -gamma / 2])


def default_dt(config: FieldConfig, lattice: FrequencyLattice) -> float:
    """Step bound resolving the beat notes, the decay and the Rabi oscillation."""
    gamma = config.gamma
    beat = lattice.period / (64 * max(1, lattice.max_abs_m))
    rabi_scale = sum(w.rabi for w in config.waves) + abs(float(lattice.delta_bar))
    dt = min(beat, 0.02 / gamma)
    if rabi_scale > 0:
        dt = min(dt, 0.1 / rabi_scale)
    return dt


def _rk4(gamma, delta_bar, env_re, env_im, x0, h, n, affine=True, check=True):
    """Fixed-step RK4; ``env_*`` hold the envelope at every half step."""
    g2 = 0.5 * gamma
    c = -g2 if affine else 0.0
    db = delta_bar
    u, v, w = x0
    out = [(u, v, w)]
    limit = 0.25 + PURITY_TOL
    h2 = 0.5 * h
    h6 = h / 6.0
    for i in range(n):
        r0, i0 = env_re[2 * i], env_im[2 * i]
        r1, i1 = env_re[2 * i + 1], env_im[2 * i + 1]
        r2, i2 = env_re[2 * i + 2], env_im[2 * i + 2]

        a1 = -g2 * u + db * v + i0 * w
        b1 = -db * u - g2 * v - r0 * w
        c1 = -i0 * u + r0 * v - gamma * w + c

        uu, vv, ww = u + h2 * a1, v + h2 * b1, w + h2 * c1
        a2 = -g2 * uu + db * vv + i1 * ww
        b2 = -db * uu - g2 * vv - r1 * ww
        c2 = -i1 * uu + r1 * vv - gamma * ww + c

        uu, vv, ww = u + h2 * a2, v + h2 * b2, w + h2 * c2
        a3 = -g2 * uu + db * vv + i1 * ww
        b3 = -db * uu - g2 * vv - r1 * ww
        c3 = -i1 * uu + r1 * vv - gamma * ww + c

        uu, vv, ww = u + h * a3, v + h * b3, w + h * c3
        a4 = -g2 * uu + db * vv + i2 * ww
        b4 = -db * uu - g2 * vv - r2 * ww
        c4 = -i2 * uu + r2 * vv - gamma * ww + c

        u += h6 * (a1 + 2 * a2 + 2 * a3 + a4)
        v += h6 * (b1 + 2 * b2 + 2 * b3 + b4)
        w += h6 * (c1 + 2 * c2 + 2 * c3 + c4)
        if check and u * u + v * v + w * w > limit:
            raise NumericalInstabilityError(
                f"Bloch vector left the unit ball at t-step {i + 1} "
                f"(|x|^2 = {u * u + v * v + w * w:.3g}); reduce the step {h:.3g}")
        out.append((u, v, w))
    return out


def integrate_obe(config: FieldConfig, lattice: FrequencyLattice, x0, t0: float,
                  t1: float, dt_max: float | None = None, affine: bool = True) -> Trajectory:
    """Integrate the OBEs from ``t0`` to ``t1`` with classical RK4.

    The step is ``(t1 - t0) / ceil((t1 - t0) / dt_max)`` so both endpoints lie
    on the grid.  With ``affine=False`` the source term is dropped and the
    purity check disabled, which is what the monodromy computation needs.
    """
    if not t1 > t0:
        raise InvalidArgumentError(f"need t1 > t0, got [{t0}, {t1}]")
    if dt_max is None:
        dt_max = default_dt(config, lattice)
    if not dt_max > 0:
        raise InvalidArgumentError(f"dt_max must be positive, got {dt_max!r}")
    x0 = x0.as_array() if isinstance(x0, BlochState) else np.asarray(x0, dtype=float)
    n = max(1, math.ceil((t1 - t0) / dt_max - 1e-12))
    h = (t1 - t0) / n
    half_grid = t0 + 0.5 * h * np.arange(2 * n + 1)
    env = np.broadcast_to(rabi_envelope(config, lattice, half_grid), half_grid.shape)
    states = _rk4(config.gamma, float(lattice.delta_bar), env.real.tolist(),
                  env.imag.tolist(), tuple(float(c) for c in x0), h, n,
                  affine=affine, check=affine)
    return Trajectory(t0 + h * np.arange(n + 1), np.array(states))


def transient_time(gamma: float = 1.0, safety: float = 10.0) -> float:
    """Burn-in after which transients are negligible: ``safety * 2 / gamma``."""
    if safety < 1:
        raise InvalidArgumentError(f"safety must be >= 1, got {safety!r}")
    return safety * 2.0 / gamma


def instantaneous_rates(config: FieldConfig, lattice: FrequencyLattice, times,
                        states) -> np.ndarray:
    """Per-wave absorption rates ``R_j(t)``, shape ``(len(times), N)``."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    coherence = states[:, 1] + 1j * states[:, 0]
    rot = np.exp(1j * np.multiply.outer(times, lattice.m_array * float(lattice.omega_c)))
    return np.real(config.omegas[None, :] * coherence[:, None] * rot)


def periodic_average_rates(config: FieldConfig, lattice: FrequencyLattice | None = None,
                           safety: float = 10.0, dt_max: float | None = None) -> PeriodAverage:
    """Burn in from the ground state, then trapezoid-average over one period.

    The averaging window is the reduced period ``T_c / g``, over which the
    populations and the absorption rates repeat.
    """
    if lattice is None:
        lattice = config.lattice()
    if dt_max is None:
        dt_max = default_dt(config, lattice)
    period = lattice.reduced_period
    n_period = max(8, math.ceil(period / dt_max))
    h = period / n_period
    n_burn = math.ceil(transient_time(config.gamma, safety) / h)
    t_burn = n_burn * h
    burn = integrate_obe(config, lattice, GROUND_STATE, 0.0, t_burn, h * (1 + 1e-12))
    traj = integrate_obe(config, lattice, burn.states[-1], t_burn, t_burn + period,
                         h * (1 + 1e-12))
    rates = instantaneous_rates(config, lattice, traj.times, traj.states)

    def mean(y):
        return (np.sum(y[:-1], axis=0) + 0.5 * (y[-1] - y[0])) / n_period

    u_bar, v_bar, w_bar = mean(traj.states)
    return PeriodAverage(mean(rates), float(u_bar), float(v_bar), float(w_bar), period, h)


def monodromy_matrix(config: FieldConfig, lattice: FrequencyLattice,
                     dt_max: float | None = None) -> np.ndarray:
    """State-transition matrix of the homogeneous OBEs over one drive period."""
    period = lattice.period
    cols = []
    for e in np.eye(3):
        traj = integrate_obe(config, lattice, e, 0.0, period, dt_max, affine=False)
        cols.append(traj.states[-1])
    return np.column_stack(cols)


def floquet_exponents(config: FieldConfig, lattice: FrequencyLattice | None = None,
                      dt_max: float | None = None) -> np.ndarray:
    """Floquet exponents from the principal logarithm of the monodromy matrix.

    The default step is a quarter of :func:`default_dt`; the exponents sit
    inside a narrow band, so they get extra accuracy.
    """
    if lattice is None:
        lattice = config.lattice()
    if dt_max is None:
        dt_max = default_dt(config, lattice) / 4
    period = lattice.period
    mono = monodromy_matrix(config, lattice, dt_max)
    eig = np.linalg.eigvals(mono)
    try:
        log_m, err = scipy.linalg.logm(mono, disp=False)
        ok = np.all(np.isfinite(log_m)) and err < 1e-8
    except (ValueError, np.linalg.LinAlgError):
        ok = False
    if ok:
        exps = np.linalg.eigvals(log_m / period)
    else:
        # defective or near-singular monodromy: logs of its eigenvalues
        exps = np.log(eig.astype(complex)) / period
    return np.sort_complex(exps)
