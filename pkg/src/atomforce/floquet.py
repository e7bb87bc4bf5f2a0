"""Harmonic-balance solution of the periodically driven optical Bloch equations.

Inserting ``x(t) = sum_n x_n exp(i n omega_c t)`` into the OBEs eliminates the
coherences ``u_n, v_n`` in favour of the population harmonics ``w_n``, which
solve a centrohermitian band system ``(I + W) w = c``.  Only harmonics on the
``g = gcd(M_0)`` sublattice couple to ``w_0``; the others vanish identically,
so unknowns are indexed by ``n = g q`` with ``q in [-K, K]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    ConsistencyError,
    ConvergenceError,
    InvalidArgumentError,
    OutOfWindowError,
    SingularAssemblyError,
)
from .bloch import BlochState
from .field import FieldConfig
from .lattice import FrequencyLattice

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_K_MAX = 2 ** 14
DENSE_BELOW = 64
CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class FourierSolution:
    """Fourier components of the periodic regime.

    ``n`` holds the solved population harmonics (multiples of ``g``) and
    ``w``/``r`` their values; ``n_coh`` holds every integer harmonic in the
    window together with the coherence components ``u`` and ``v``.
    """

    K: int
    g: int
    omega_c: float
    n: np.ndarray
    w: np.ndarray
    r: np.ndarray
    n_coh: np.ndarray
    u: np.ndarray
    v: np.ndarray
    s_tilde_j: np.ndarray
    s_tilde: float
    s_j: np.ndarray
    s_eff: float
    w0: float
    converged: bool = True
    residual: float = 0.0
    edge: float = 0.0
    history: tuple = ()

    @property
    def n_window(self) -> int:
        return self.K * self.g

    def _lookup(self, values, n):
        n = np.asarray(n)
        q, rem = np.divmod(n, self.g)
        ok = (rem == 0) & (np.abs(q) <= self.K)
        out = np.zeros(n.shape, dtype=complex)
        out[ok] = values[(q[ok] + self.K).astype(np.int64)]
        return out if out.ndim else complex(out)

    def w_at(self, n):
        """``w_n``; zero off the sublattice and outside the window."""
        return self._lookup(self.w, n)

    def r_at(self, n):
        return self._lookup(self.r, n)

    def _coh_lookup(self, values, n):
        n = np.asarray(n)
        ok = np.abs(n) <= self.n_window
        out = np.zeros(n.shape, dtype=complex)
        out[ok] = values[(n[ok] + self.n_window).astype(np.int64)]
        return out if out.ndim else complex(out)

    def u_at(self, n):
        return self._coh_lookup(self.u, n)

    def v_at(self, n):
        return self._coh_lookup(self.v, n)


@dataclass(frozen=True)
class ForceResult:
    """Mean absorption rates and forces, optionally with harmonic spectra.

    ``spectrum_R[i, j]`` is the harmonic ``spectrum_n[i]`` of wave ``j``'s
    absorption rate; force harmonics follow as ``R_{j,n} k_j``.
    """

    R_bar: np.ndarray
    F_bar: np.ndarray
    F_total: np.ndarray
    s_j: np.ndarray
    s_eff: float
    w0: float
    k: np.ndarray
    spectrum_n: Optional[np.ndarray] = None
    spectrum_R: Optional[np.ndarray] = None

    @property
    def spectrum_F(self) -> Optional[np.ndarray]:
        if self.spectrum_R is None:
            return None
        return self.spectrum_R[:, :, None] * self.k[None, :, :]


@dataclass
class TruncatedSystem:
    """``(I + W) w = c`` restricted to ``n = g q``, ``|q| <= K``.

    ``bands`` maps a sublattice offset ``d`` to the coupling coefficients
    ``W_{n, g d}`` for every row (entries whose column falls outside the
    window are zero).
    """

    K: int
    g: int
    n: np.ndarray
    bands: dict
    rhs: np.ndarray
    c0: float
    normalizer: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 * self.K + 1

    @property
    def half_bandwidth(self) -> int:
        return max((abs(d) for d in self.bands), default=0)

    def dense(self) -> np.ndarray:
        a = np.eye(self.dim, dtype=complex)
        for d, coeffs in self.bands.items():
            rows = np.arange(max(0, -d), min(self.dim, self.dim - d))
            a[rows, rows + d] = coeffs[rows]
        return a

    def banded(self) -> np.ndarray:
        """LAPACK band storage: ``ab[b + i - j, j] = A[i, j]``."""
        b = self.half_bandwidth
        ab = np.zeros((2 * b + 1, self.dim), dtype=complex)
        ab[b, :] = 1.0
        for d, coeffs in self.bands.items():
            rows = np.arange(max(0, -d), min(self.dim, self.dim - d))
            ab[b - d, rows + d] = coeffs[rows]
        return ab

    def solve(self) -> np.ndarray:
        b = self.half_bandwidth
        if b == 0:
            return self.rhs.copy()
        if self.dim < DENSE_BELOW:
            return np.linalg.solve(self.dense(), self.rhs)
        return scipy.linalg.solve_banded((b, b), self.banded(), self.rhs,
                                         check_finite=False)


def _pairs(lattice: FrequencyLattice) -> dict:
    """Group wave pairs ``(j, l)`` by ``m_l - m_j``."""
    groups: dict = {}
    for j, mj in enumerate(lattice.m):
        for l, ml in enumerate(lattice.m):
            groups.setdefault(ml - mj, []).append((j, l))
    return groups


def tau(n, sign: int, gamma: float, lattice: FrequencyLattice):
    """``tau_n^{+/-} = 1 / (gamma + 2 i (n omega_c +/- delta_bar))``."""
    wc = float(lattice.omega_c)
    db = float(lattice.delta_bar)
    return 1.0 / (gamma + 2j * (np.asarray(n, dtype=float) * wc + sign * db))


def _beta(n, m: int, config: FieldConfig, lattice: FrequencyLattice, groups: dict):
    n = np.asarray(n, dtype=float)
    omegas = config.omegas
    gamma = config.gamma
    out = np.zeros(n.shape, dtype=complex)
    for j, l in groups.get(m, ()):
        coeff = omegas[j] * np.conj(omegas[l])
        out = out + coeff * (tau(n + lattice.m[l], +1, gamma, lattice)
                             + tau(n - lattice.m[j], -1, gamma, lattice))
    return out


def _normalizer(n, config, lattice, groups):
    n = np.asarray(n, dtype=float)
    alpha = config.gamma + 1j * n * float(lattice.omega_c)
    d = alpha + _beta(n, 0, config, lattice, groups)
    if np.any(d == 0):
        raise SingularAssemblyError("vanishing diagonal normalizer alpha_n + beta_n0")
    return d


def matrix_element(n: int, m: int, config: FieldConfig, lattice: FrequencyLattice) -> complex:
    """Coupling ``W_{n,m}`` for ``m != 0``; the normalizer ``alpha_n + beta_{n,0}`` for ``m == 0``."""
    if m != 0 and m not in lattice.m_offsets:
        raise InvalidArgumentError(f"offset {m} not in M_0 = {lattice.m_offsets}")
    groups = _pairs(lattice)
    norm = complex(_normalizer(n, config, lattice, groups))
    if m == 0:
        return norm
    return complex(_beta(n, m, config, lattice, groups)) / norm


def s_tilde(config: FieldConfig, lattice: FrequencyLattice | None = None):
    """Saturation parameters restricted to equal-frequency wave groups.

    Returns ``(s_tilde_j, s_tilde)``.
    """
    gamma = config.gamma
    omegas = config.omegas
    det = config.detunings
    out = np.empty(len(omegas))
    for j, dj in enumerate(det):
        same = sum(np.conj(omegas[l]) for l, dl in enumerate(det) if dl == dj)
        out[j] = (omegas[j] / (gamma / 2 - 1j * float(dj)) * same / gamma).real
    return out, float(out.sum())


def assemble_truncated(config: FieldConfig, lattice: FrequencyLattice, K: int) -> TruncatedSystem:
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K!r}")
    g = lattice.g
    q = np.arange(-K, K + 1)
    n = g * q
    groups = _pairs(lattice)
    norm = _normalizer(n, config, lattice, groups)
    bands = {}
    for m in lattice.m_offsets:
        if m <= 0:
            continue
        coeffs = _beta(n, m, config, lattice, groups) / norm
        d = m // g
        # centrohermitian by construction: W_{n,-m} = conj(W_{-n,m})
        bands[d] = coeffs
        bands[-d] = np.conj(coeffs[::-1])
    for d, coeffs in bands.items():
        rows = np.arange(2 * K + 1)
        coeffs[(rows + d < 0) | (rows + d > 2 * K)] = 0.0
    _, st = s_tilde(config, lattice)
    c0 = -1.0 / (2.0 * (1.0 + st))
    rhs = np.zeros(2 * K + 1, dtype=complex)
    rhs[K] = c0
    return TruncatedSystem(K, g, n, bands, rhs, c0, norm)


def default_k0(config: FieldConfig, lattice: FrequencyLattice) -> int:
    """Initial truncation covering a few drive-strength widths of spectrum.

    The window is sized in physical frequency, ``4 (Omega_T + max|delta_j -
    delta_bar|)``, then converted to sublattice steps.
    """
    if not lattice.m_offsets:
        return 8
    spread = lattice.max_abs_m * float(lattice.omega_c)
    span = 4.0 * (config.total_rabi * config.gamma + spread)
    k = math.ceil(span / (lattice.g * float(lattice.omega_c)))
    return max(8, 2 * lattice.bandwidth, k)


def _symmetrize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + np.conj(x[::-1]))


def _solve_at(config, lattice, K):
    system = assemble_truncated(config, lattice, K)
    w = system.solve()
    w0 = w[K]
    if abs(w0.imag) > 1e-10 * abs(w0) + 1e-15:
        log.warning("w_0 has imaginary part %.3g at K=%d", w0.imag, K)
    return _symmetrize(w)


def coherence_components(solution_or_w, config: FieldConfig, lattice: FrequencyLattice,
                         K: int | None = None):
    """Coherence harmonics ``u_n``, ``v_n`` for every integer ``|n| <= K g``.

    Accepts either a :class:`FourierSolution` or a raw sublattice vector ``w``
    (then ``K`` is required).  Returns ``(n, u, v)``.
    """
    if isinstance(solution_or_w, FourierSolution):
        K = solution_or_w.K
        w = solution_or_w.w
    else:
        w = np.asarray(solution_or_w)
    g = lattice.g
    nw = K * g
    n = np.arange(-nw, nw + 1)

    def w_at(idx):
        q, rem = np.divmod(idx, g)
        ok = (rem == 0) & (np.abs(q) <= K)
        out = np.zeros(idx.shape, dtype=complex)
        out[ok] = w[q[ok] + K]
        return out

    omegas = config.omegas
    plus = np.zeros(n.shape, dtype=complex)
    minus = np.zeros(n.shape, dtype=complex)
    for j, mj in enumerate(lattice.m):
        plus += omegas[j] * w_at(n - mj)
        minus += np.conj(omegas[j]) * w_at(n + mj)
    tp = tau(n, +1, config.gamma, lattice)
    tm = tau(n, -1, config.gamma, lattice)
    u = _symmetrize(-1j * (tp * plus - tm * minus))
    v = _symmetrize(-(tp * plus + tm * minus))
    return n, u, v


def _s_from_r(r_at, config: FieldConfig, lattice: FrequencyLattice) -> np.ndarray:
    gamma = config.gamma
    omegas = config.omegas
    m = lattice.m
    out = np.empty(len(omegas))
    for j in range(len(omegas)):
        acc = sum(np.conj(omegas[l]) / gamma * r_at(m[l] - m[j]) for l in range(len(omegas)))
        out[j] = (omegas[j] / (gamma / 2 - 1j * float(config.detunings[j])) * acc).real
    return out


def saturation_parameters(solution: FourierSolution, config: FieldConfig,
                          lattice: FrequencyLattice, tol: float = CONSISTENCY_TOL):
    """Generalized saturation parameters from the harmonic ratios.

    Returns ``(s_j, s_eff, w0)`` with ``w0 = -(1/2) / (1 + s_eff)``, after
    checking that value against the directly solved ``w_0``.
    """
    s_j = _s_from_r(solution.r_at, config, lattice)
    s_eff = float(s_j.sum())
    w0 = -0.5 / (1.0 + s_eff)
    if abs(w0 - solution.w0) > tol:
        raise ConsistencyError(
            f"w_0 = {solution.w0!r} disagrees with -(1/2)/(1+s_eff) = {w0!r}; "
            "truncation too small")
    return s_j, s_eff, w0


def _build_solution(config, lattice, K, w, converged=True, residual=0.0, edge=0.0,
                    history=()):
    w0 = float(w[K].real)
    if w0 == 0.0:
        raise ConsistencyError("w_0 vanished")
    r = w / w0
    n_coh, u, v = coherence_components(w, config, lattice, K)
    stj, st = s_tilde(config, lattice)
    g = lattice.g
    probe = FourierSolution(K, g, float(lattice.omega_c), g * np.arange(-K, K + 1), w, r,
                            n_coh, u, v, stj, st, np.zeros(len(stj)), 0.0, w0,
                            converged, residual, edge, tuple(history))
    s_j, s_eff, _ = saturation_parameters(probe, config, lattice)
    return FourierSolution(K, g, probe.omega_c, probe.n, w, r, n_coh, u, v, stj, st,
                           s_j, s_eff, w0, converged, residual, edge, tuple(history))


def solve_truncated(config: FieldConfig, lattice: FrequencyLattice, K: int) -> FourierSolution:
    """Single fixed-truncation solve (no convergence control)."""
    w = _solve_at(config, lattice, K)
    return _build_solution(config, lattice, K, w, converged=False)


def solve_adaptive(config: FieldConfig, lattice: FrequencyLattice | None = None,
                   rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                   K0: int | None = None, K_max: int = DEFAULT_K_MAX) -> FourierSolution:
    """Solve larger and larger truncations until ``w`` stops changing.

    Truncations double from ``K0``.  A solve at ``2K`` is accepted when it
    differs from the one at ``K`` by less than ``atol + rtol |w_0|`` on every
    common harmonic and its edge harmonics are below ``atol``.
    """
    if lattice is None:
        lattice = config.lattice()
    if not (rtol > 0 and atol > 0):
        raise InvalidArgumentError("rtol and atol must be positive")
    if K0 is None:
        K0 = default_k0(config, lattice)
    if K0 < 2:
        raise InvalidArgumentError(f"K0 must be >= 2, got {K0!r}")
    K0 = max(K0, lattice.bandwidth)

    if lattice.m_offsets and 2 * K0 > K_max:
        raise ConvergenceError(
            f"initial truncation K0={K0} already exceeds K_max={K_max}/2 "
            f"(lattice spacing {lattice.omega_c}, max |m| {lattice.max_abs_m})", [])
    if not lattice.m_offsets:
        w = _solve_at(config, lattice, K0)
        return _build_solution(config, lattice, K0, w)

    history = []
    K = K0
    prev = _solve_at(config, lattice, K)
    while True:
        K2 = 2 * K
        if K2 > K_max:
            raise ConvergenceError(
                f"no convergence up to K_max={K_max}; residual history {history}",
                history)
        cur = _solve_at(config, lattice, K2)
        diff = float(np.max(np.abs(cur[K2 - K:K2 + K + 1] - prev)))
        edge = float(max(abs(cur[0]), abs(cur[-1])))
        history.append((K2, diff, edge))
        log.debug("K=%d residual=%.3g edge=%.3g", K2, diff, edge)
        if diff < atol + rtol * abs(cur[K2]) and edge < atol:
            return _build_solution(config, lattice, K2, cur, True, diff, edge, history)
        prev, K = cur, K2


def mean_forces(solution: FourierSolution, config: FieldConfig) -> ForceResult:
    gamma = config.gamma
    R_bar = 0.5 * gamma * solution.s_j / (1.0 + solution.s_eff)
    k = config.k_vectors
    F_bar = R_bar[:, None] * k
    return ForceResult(R_bar, F_bar, F_bar.sum(axis=0), solution.s_j, solution.s_eff,
                       solution.w0, k)


def rate_and_force_spectrum(solution: FourierSolution, config: FieldConfig,
                            lattice: FrequencyLattice, n_max: int) -> ForceResult:
    """Harmonics ``R_{j,n}`` for ``n`` on the ``g`` sublattice, ``|n| <= n_max``."""
    if n_max < 0 or n_max > solution.n_window:
        raise OutOfWindowError(
            f"n_max={n_max} outside solved window |n| <= {solution.n_window}")
    g = lattice.g
    gamma = config.gamma
    wc = float(lattice.omega_c)
    n = g * np.arange(-(n_max // g), n_max // g + 1)
    omegas = config.omegas
    m = lattice.m

    def sigma(nn):
        out = np.empty((len(nn), len(omegas)), dtype=complex)
        for j in range(len(omegas)):
            acc = sum(np.conj(omegas[l]) / gamma * solution.r_at(nn + m[l] - m[j])
                      for l in range(len(omegas)))
            out[:, j] = omegas[j] / (gamma / 2 + 1j * (nn * wc - float(config.detunings[j]))) * acc
        return out

    s_jn = 0.5 * (sigma(n) + np.conj(sigma(-n)))
    R = 0.5 * gamma * s_jn / (1.0 + solution.s_eff)
    base = mean_forces(solution, config)
    return ForceResult(base.R_bar, base.F_bar, base.F_total, base.s_j, base.s_eff,
                       base.w0, base.k, n, R)


def reconstruct_time(solution: FourierSolution, t):
    """Bloch vector ``(u, v, w)`` of the periodic regime at time(s) ``t``.

    Returns a :class:`BlochState` for scalar ``t`` else an array of shape
    ``(len(t), 3)``.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    wc = solution.omega_c
    e_coh = np.exp(1j * wc * np.multiply.outer(t, solution.n_coh))
    e_pop = np.exp(1j * wc * np.multiply.outer(t, solution.n))
    u = (e_coh @ solution.u).real
    v = (e_coh @ solution.v).real
    w = (e_pop @ solution.w).real
    out = np.column_stack([u, v, w])
    if scalar:
        return BlochState(float(u[0]), float(v[0]), float(w[0]))
    return out
