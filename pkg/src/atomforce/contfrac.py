"""Two-frequency fast path: continued fraction plus three-term recurrence.

For two waves of different frequencies only harmonics ``n = k n_s`` couple,
and the population ratios ``r_k = w_{k n_s} / w_0`` obey
``r_k + b_k r_{k+1} + a_k r_{k-1} = 0`` (``k >= 1``) with
``b_k = W_{k n_s, n_s}`` and ``a_k = conj(W_{-k n_s, n_s})``.  The decaying
solution has ``r_1 = -a_1 / (1 + K(p_k / 1))`` with ``p_k = -b_k a_{k+1}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import floquet
from .errors import (
    ContinuedFractionError,
    InvalidArgumentError,
    RecurrenceInstabilityError,
)
from .field import FieldConfig

TINY = 1e-30
MAX_DEPTH = 10_000
GROWTH_LIMIT = 1e6


@dataclass(frozen=True)
class PairLattice:
    n1: int
    n2: int
    n_s: int
    m1: int
    m2: int
    sign: int


def pair_lattice(config: FieldConfig) -> PairLattice:
    if config.n_waves != 2:
        raise InvalidArgumentError(f"pair lattice needs exactly 2 waves, got {config.n_waves}")
    d1, d2 = config.detunings
    if d1 == d2:
        raise InvalidArgumentError("pair lattice needs two distinct detunings")
    lat = config.lattice()
    sign = 1 if d1 > d2 else -1
    m1, m2 = lat.m
    n2, n1 = abs(m1), abs(m2)
    assert math.gcd(n1, n2) == 1 and m1 == sign * n2 and m2 == -sign * n1
    return PairLattice(n1, n2, n1 + n2, m1, m2, sign)


def eval_continued_fraction(partial_numerators: Iterable[complex], tol: float = 1e-15,
                            max_depth: int = MAX_DEPTH) -> complex:
    """Evaluate ``p_1 / (1 + p_2 / (1 + ...))`` by the modified Lentz method.

    Stops once successive convergents agree to relative precision ``tol``;
    a finite sequence is evaluated exactly.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol!r}")
    f = TINY
    C, D = f, 0.0
    prev = None
    for depth, p in enumerate(partial_numerators, start=1):
        if depth > max_depth:
            raise ContinuedFractionError(
                f"continued fraction not converged after {max_depth} terms",
                last=f, previous=prev)
        D = 1.0 + p * D
        if D == 0:
            D = TINY
        C = 1.0 + p / C
        if C == 0:
            C = TINY
        D = 1.0 / D
        prev = f
        f = f * C * D
        if abs(C * D - 1.0) < tol:
            break
    return 0j if f == TINY else complex(f)


class _Coefficients:
    """Lazily evaluated ``a_k``, ``b_k`` on the ``n_s`` sublattice."""

    def __init__(self, config, lattice, n_s):
        self.config = config
        self.lattice = lattice
        self.n_s = n_s
        self.groups = floquet._pairs(lattice)
        self._a = {}
        self._b = {}

    def _w(self, n):
        c, lat, g = self.config, self.lattice, self.groups
        return complex(floquet._beta(n, self.n_s, c, lat, g)
                       / floquet._normalizer(n, c, lat, g))

    def a(self, k):
        if k not in self._a:
            self._a[k] = self._w(-k * self.n_s).conjugate()
        return self._a[k]

    def b(self, k):
        if k not in self._b:
            self._b[k] = self._w(k * self.n_s)
        return self._b[k]


def first_ratio(coeffs: _Coefficients, tol: float = 1e-15, max_depth: int = MAX_DEPTH):
    """``r_{n_s}`` from the continued fraction."""
    tail = eval_continued_fraction(
        (-coeffs.b(k) * coeffs.a(k + 1) for k in itertools.count(1)), tol, max_depth)
    return -coeffs.a(1) / (1.0 + tail)


def _ratios_forward(coeffs, r1, atol, depth_cap):
    r = [1.0 + 0j, r1]
    peak = abs(r1)
    k = 1
    while abs(r[-1]) >= atol or abs(r[-2]) >= atol:
        if k >= depth_cap:
            raise RecurrenceInstabilityError(
                f"forward recurrence did not decay below {atol} in {depth_cap} steps; "
                "use the matrix solver")
        nxt = -(r[k] + coeffs.a(k) * r[k - 1]) / coeffs.b(k)
        peak = max(peak, abs(nxt))
        if abs(nxt) > GROWTH_LIMIT * max(abs(r1), atol) or not np.isfinite(nxt):
            raise RecurrenceInstabilityError(
                f"forward recurrence grew to {abs(nxt):.3g} at k={k + 1}; "
                "use the matrix solver")
        r.append(nxt)
        k += 1
    return np.array(r)


def _ratios_backward(coeffs, r1, atol, tol, depth_cap):
    """Minimal solution via successive ratios ``rho_k = r_k / r_{k-1}``.

    Each ratio obeys ``rho_k = -a_k / (1 + b_k rho_{k+1})``; sweeping that
    relation downward from a deep start is the stable direction.
    """
    depth = 8
    while True:
        rho = np.zeros(depth + 2, dtype=complex)
        for k in range(depth, 0, -1):
            rho[k] = -coeffs.a(k) / (1.0 + coeffs.b(k) * rho[k + 1])
        r = np.concatenate([[1.0 + 0j], np.cumprod(rho[1:depth + 1])])
        tail = np.abs(r[-3:])
        if np.all(tail < atol) and abs(rho[1] - r1) <= tol * max(1.0, abs(r1)) * 1e3:
            cut = len(r)
            while cut > 2 and abs(r[cut - 1]) < atol * 1e-6:
                cut -= 1
            r = r[:cut]
            r[1] = r1
            return r
        if depth >= depth_cap:
            raise RecurrenceInstabilityError(
                f"ratios did not decay below {atol} within {depth_cap} harmonics")
        depth *= 2


def solve_pair(config: FieldConfig, rtol: float = floquet.DEFAULT_RTOL,
               atol: float = floquet.DEFAULT_ATOL, n_max: int | None = None,
               recurrence: str = "backward", max_depth: int = MAX_DEPTH):
    """Two-wave solve.  Returns ``(FourierSolution, ForceResult)``.

    ``r_{n_s}`` comes from the continued fraction; higher ratios from the
    three-term recurrence, either swept backward through the same ratio
    relation (default, stable) or run forward exactly as the recurrence is
    written (guarded by a growth monitor).  Spectra are included up to
    ``n_max`` (default: the whole computed window).
    """
    pair = pair_lattice(config)
    lattice = config.lattice()
    n_s = pair.n_s
    assert lattice.g == n_s
    coeffs = _Coefficients(config, lattice, n_s)
    r1 = first_ratio(coeffs, tol=min(rtol, 1e-14), max_depth=max_depth)
    if recurrence == "forward":
        r_pos = _ratios_forward(coeffs, r1, atol, max_depth)
    elif recurrence == "backward":
        r_pos = _ratios_backward(coeffs, r1, atol, min(rtol, 1e-14), max_depth)
    else:
        raise InvalidArgumentError(f"unknown recurrence {recurrence!r}")

    K = max(len(r_pos) - 1, 1)
    r_pos = np.concatenate([r_pos, np.zeros(K + 1 - len(r_pos))])
    r = np.concatenate([np.conj(r_pos[:0:-1]), r_pos])
    r[K] = 1.0
    s_j = floquet._s_from_r(
        lambda n: r[n // n_s + K] if (n % n_s == 0 and abs(n // n_s) <= K) else 0j,
        config, lattice)
    s_eff = float(s_j.sum())
    w0 = -0.5 / (1.0 + s_eff)
    w = r * w0
    n_coh, u, v = floquet.coherence_components(w, config, lattice, K)
    stj, st = floquet.s_tilde(config, lattice)
    edge = float(abs(w[0]))
    sol = floquet.FourierSolution(K, n_s, float(lattice.omega_c), n_s * np.arange(-K, K + 1),
                                  w, r, n_coh, u, v, stj, st, s_j, s_eff, w0,
                                  True, 0.0, edge, ())
    if n_max is None:
        n_max = sol.n_window
    forces = floquet.rate_and_force_spectrum(sol, config, lattice, n_max)
    return sol, forces
