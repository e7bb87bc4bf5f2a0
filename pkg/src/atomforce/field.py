"""Problem-instance types: the atom and the set of driving plane waves.

Natural units are used throughout: the decay rate ``gamma`` sets the frequency
unit, wave vectors are measured in a reference wavenumber ``k_ref``, velocities
in ``gamma / k_ref`` and forces in ``hbar * k_ref * gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

DEFAULT_MAX_DEN = 4096


def as_rational(x, max_den: int = DEFAULT_MAX_DEN) -> Fraction:
    """Coerce ints and Fractions exactly; rationalize floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    from .lattice import rationalize

    return rationalize(float(x), max_den)


@dataclass(frozen=True)
class AtomParams:
    gamma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma!r}")


@dataclass(frozen=True)
class PlaneWave:
    """One laser: Rabi modulus and phase, detuning from resonance, wave vector.

    The phase absorbs the laser phase, the spatial phase at the atom position
    and the dipole matrix-element phase, so the complex Rabi frequency is
    ``rabi * exp(1j * phase)``.
    """

    rabi: float
    detuning: Fraction
    phase: float = 0.0
    k: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        rabi = float(self.rabi)
        if not math.isfinite(rabi) or rabi < 0:
            raise InvalidArgumentError(f"rabi must be finite and >= 0, got {self.rabi!r}")
        phase = float(self.phase)
        if not math.isfinite(phase):
            raise InvalidArgumentError(f"phase must be finite, got {self.phase!r}")
        k = tuple(float(c) for c in self.k)
        if len(k) != 3 or not all(math.isfinite(c) for c in k):
            raise InvalidArgumentError(f"k must be a finite 3-vector, got {self.k!r}")
        object.__setattr__(self, "rabi", rabi)
        object.__setattr__(self, "phase", phase % (2 * math.pi))
        object.__setattr__(self, "detuning", as_rational(self.detuning))
        object.__setattr__(self, "k", k)

    @property
    def omega(self) -> complex:
        """Complex Rabi frequency."""
        return self.rabi * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class FieldConfig:
    """A two-level atom driven by ``N >= 1`` plane waves.

    ``weights`` are the nonnegative rationals (summing to one) used to define
    the mean detuning; ``None`` means equal weights.
    """

    waves: tuple
    atom: AtomParams = field(default_factory=AtomParams)
    weights: tuple | None = None
    max_den: int = DEFAULT_MAX_DEN

    def __post_init__(self):
        waves = tuple(self.waves)
        if not waves:
            raise InvalidArgumentError("at least one plane wave is required")
        if int(self.max_den) < 1:
            raise InvalidArgumentError(f"max_den must be >= 1, got {self.max_den!r}")
        object.__setattr__(self, "waves", waves)
        object.__setattr__(self, "max_den", int(self.max_den))
        if self.weights is None:
            weights = tuple(Fraction(1, len(waves)) for _ in waves)
        else:
            weights = tuple(as_rational(w, self.max_den) for w in self.weights)
        if len(weights) != len(waves):
            raise InvalidArgumentError(
                f"got {len(weights)} weights for {len(waves)} waves")
        if any(w < 0 for w in weights) or sum(weights) != 1:
            raise InvalidArgumentError(f"weights must be >= 0 and sum to 1, got {weights}")
        object.__setattr__(self, "weights", weights)

    @property
    def n_waves(self) -> int:
        return len(self.waves)

    @property
    def gamma(self) -> float:
        return self.atom.gamma

    @property
    def detunings(self) -> tuple:
        return tuple(w.detuning for w in self.waves)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([w.omega for w in self.waves], dtype=complex)

    @property
    def k_vectors(self) -> np.ndarray:
        return np.array([w.k for w in self.waves], dtype=float)

    @property
    def total_rabi(self) -> float:
        """Sum of Rabi moduli in units of gamma."""
        return sum(w.rabi for w in self.waves) / self.gamma

    def lattice(self):
        from .lattice import build_lattice

        return build_lattice(self.detunings, self.weights)

    def with_waves(self, waves: Sequence[PlaneWave]) -> "FieldConfig":
        return replace(self, waves=tuple(waves))

    def shift_phases(self, delta: float) -> "FieldConfig":
        return self.with_waves(replace(w, phase=w.phase + delta) for w in self.waves)
