"""Exact integer frequency lattice underlying a commensurable set of detunings."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import reduce
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import InvalidArgumentError

if TYPE_CHECKING:
    from .field import FieldConfig


def rationalize(x: float, max_den: int) -> Fraction:
    """Closest fraction to ``x`` with denominator at most ``max_den``."""
    if max_den < 1:
        raise InvalidArgumentError(f"max_den must be >= 1, got {max_den!r}")
    if isinstance(x, Fraction):
        return x.limit_denominator(max_den)
    x = float(x)
    if not math.isfinite(x):
        raise InvalidArgumentError(f"cannot rationalize non-finite value {x!r}")
    return Fraction(x).limit_denominator(max_den)


def rational_gcd(values: Sequence[Fraction]) -> Fraction:
    """Positive gcd of nonzero rationals: gcd of numerators over lcm of denominators."""
    values = [Fraction(v) for v in values]
    den = reduce(math.lcm, (v.denominator for v in values), 1)
    num = reduce(math.gcd, (abs(v.numerator * (den // v.denominator)) for v in values), 0)
    return Fraction(num, den)


@dataclass(frozen=True)
class FrequencyLattice:
    """Commensurability skeleton of a multi-wave drive.

    Every detuning satisfies ``delta_j = delta_bar + m_j * omega_c`` exactly.
    ``m_offsets`` is the sorted set of distinct nonzero ``m_l - m_j`` and ``g``
    their gcd, so only harmonics on the ``g`` sublattice couple to ``n = 0``.
    """

    delta_bar: Fraction
    omega_c: Fraction
    m: tuple
    m_offsets: tuple
    g: int
    weights: tuple

    @property
    def period(self) -> float:
        return 2 * math.pi / float(self.omega_c)

    @property
    def reduced_period(self) -> float:
        """Period of populations and absorption rates, ``T_c / g``."""
        return self.period / self.g

    @property
    def m_array(self) -> np.ndarray:
        return np.array(self.m, dtype=np.int64)

    @property
    def max_abs_m(self) -> int:
        return max(abs(m) for m in self.m)

    @property
    def bandwidth(self) -> int:
        """Half-bandwidth of the sublattice-reduced system."""
        return max((abs(m) for m in self.m_offsets), default=0) // self.g


def build_lattice(detunings: Sequence, weights: Sequence | None = None) -> FrequencyLattice:
    detunings = [Fraction(d) for d in detunings]
    if not detunings:
        raise InvalidArgumentError("at least one detuning is required")
    if weights is None:
        weights = [Fraction(1, len(detunings))] * len(detunings)
    weights = [Fraction(w) for w in weights]
    if len(weights) != len(detunings):
        raise InvalidArgumentError(
            f"got {len(weights)} weights for {len(detunings)} detunings")
    if any(w < 0 for w in weights):
        raise InvalidArgumentError("weights must be nonnegative")
    if sum(weights) != 1:
        raise InvalidArgumentError(f"weights must sum to 1, got {sum(weights)}")

    delta_bar = sum(w * d for w, d in zip(weights, detunings))
    shifts = [d - delta_bar for d in detunings]
    nonzero = [s for s in shifts if s != 0]
    if not nonzero:
        return FrequencyLattice(delta_bar, Fraction(1), (0,) * len(shifts), (), 1,
                                tuple(weights))

    omega_c = rational_gcd(nonzero)
    m = []
    for s in shifts:
        q = s / omega_c
        assert q.denominator == 1
        m.append(int(q))
    offsets = sorted({ml - mj for ml in m for mj in m if ml != mj})
    g = reduce(math.gcd, (abs(o) for o in offsets), 0) or 1
    return FrequencyLattice(delta_bar, omega_c, tuple(m), tuple(offsets), g, tuple(weights))


def doppler_shift(config, velocity) -> "FieldConfig":
    """Atom-frame copy of ``config``: each detuning becomes ``delta_j - k_j . v``.

    Shifted detunings are re-rationalized with ``config.max_den``.
    """
    v = np.asarray(velocity, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"velocity must be a finite 3-vector, got {velocity!r}")
    if not np.any(v):
        return config
    waves = []
    for wave in config.waves:
        kv = float(np.dot(wave.k, v))
        shifted = float(wave.detuning) - kv
        waves.append(replace(wave, detuning=rationalize(shifted, config.max_den)))
    return config.with_waves(waves)
