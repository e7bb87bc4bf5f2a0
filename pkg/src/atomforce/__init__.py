"""Exact mean light forces on a two-level atom driven by several plane waves."""

from .bloch import (
    BlochState,
    floquet_exponents,
    integrate_obe,
    obe_rhs,
    periodic_average_rates,
    rabi_envelope,
    transient_time,
)
from .contfrac import eval_continued_fraction, pair_lattice, solve_pair
from .field import AtomParams, FieldConfig, PlaneWave
from .floquet import (
    FourierSolution,
    ForceResult,
    assemble_truncated,
    coherence_components,
    matrix_element,
    mean_forces,
    rate_and_force_spectrum,
    reconstruct_time,
    s_tilde,
    saturation_parameters,
    solve_adaptive,
)
from .lattice import FrequencyLattice, build_lattice, doppler_shift, rationalize
from .scenarios import (
    closed_form_reference,
    compute_forces,
    phase_average,
    preset,
    solve_config,
    velocity_sweep,
)

__version__ = "0.1.0"
