import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomforce import FieldConfig, PlaneWave, build_lattice, doppler_shift, preset, rationalize
from atomforce.errors import InvalidArgumentError


def brute_force_best(x, max_den):
    best = None
    for q in range(1, max_den + 1):
        p = round(x * q)
        err = abs(x - p / q)
        if best is None or err < best[0] - 1e-18:
            best = (err, Fraction(p, q))
    return best[1]


@pytest.mark.parametrize("x, max_den, expected", [
    (0.5, 10, Fraction(1, 2)),
    (0.0, 10 ** 6, Fraction(0)),
    (math.pi, 113, Fraction(355, 113)),
])
def test_rationalize_examples(x, max_den, expected):
    assert rationalize(x, max_den) == expected


def test_rationalize_pi_matches_exhaustive_search():
    assert brute_force_best(math.pi, 113) == Fraction(355, 113)


@pytest.mark.parametrize("x", [0.3333333333, -2.718281828, 1.41421356, 7.1])
def test_rationalize_minimal_error(x):
    assert rationalize(x, 200) == brute_force_best(x, 200)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_rationalize_rejects_non_finite(bad):
    with pytest.raises(InvalidArgumentError):
        rationalize(bad, 10)


@given(st.integers(-10 ** 6, 10 ** 6), st.integers(1, 4096))
def test_rationalize_round_trips(num, den):
    frac = Fraction(num, den)
    assert rationalize(num / den, 4096) == frac


def test_lattice_bichromatic_example():
    lat = build_lattice([10, -10, 10, -10], [Fraction(1, 4)] * 4)
    assert lat.delta_bar == 0
    assert lat.omega_c == 10
    assert lat.m == (1, -1, 1, -1)
    assert lat.m_offsets == (-2, 2)
    assert lat.g == 2


def test_lattice_asymmetric_detunings():
    lat = build_lattice([1, -2], [Fraction(1, 2)] * 2)
    assert lat.delta_bar == Fraction(-1, 2)
    assert lat.omega_c == Fraction(3, 2)
    assert lat.m == (1, -1)
    assert lat.m_offsets == (-2, 2)
    assert lat.g == 2


def test_lattice_identical_frequencies():
    lat = build_lattice([5, 5], [Fraction(1, 2)] * 2)
    assert lat.delta_bar == 5
    assert lat.m == (0, 0)
    assert lat.m_offsets == ()
    assert lat.g == 1
    assert lat.omega_c == 1


def test_lattice_errors():
    with pytest.raises(InvalidArgumentError):
        build_lattice([], [])
    with pytest.raises(InvalidArgumentError):
        build_lattice([1, 2], [Fraction(1, 2), Fraction(1, 3)])
    with pytest.raises(InvalidArgumentError):
        build_lattice([1, 2], [Fraction(3, 2), Fraction(-1, 2)])


rationals = st.fractions(min_value=-40, max_value=40, max_denominator=12)


@st.composite
def detunings_and_weights(draw):
    n = draw(st.integers(1, 5))
    dets = draw(st.lists(rationals, min_size=n, max_size=n))
    raw = draw(st.lists(st.integers(0, 5), min_size=n, max_size=n).filter(lambda x: sum(x) > 0))
    total = sum(raw)
    return dets, [Fraction(r, total) for r in raw]


@settings(max_examples=200, deadline=None)
@given(detunings_and_weights())
def test_lattice_invariants(data):
    dets, weights = data
    lat = build_lattice(dets, weights)
    assert sum(lat.weights) == 1
    assert sum(k * m for k, m in zip(weights, lat.m)) == 0
    for d, m in zip(dets, lat.m):
        assert d == lat.delta_bar + m * lat.omega_c
    offsets = set(lat.m_offsets)
    assert offsets == {a - b for a in lat.m for b in lat.m if a != b}
    assert all(-o in offsets for o in offsets)
    assert lat.omega_c > 0
    if offsets:
        assert lat.g == math.gcd(*offsets)
        assert all(o % lat.g == 0 for o in offsets)
    else:
        assert lat.g == 1 and all(m == 0 for m in lat.m)


@settings(max_examples=100, deadline=None)
@given(detunings_and_weights(), st.fractions(min_value=Fraction(1, 9), max_value=20,
                                             max_denominator=9))
def test_lattice_scaling(data, lam):
    dets, weights = data
    base = build_lattice(dets, weights)
    scaled = build_lattice([lam * d for d in dets], weights)
    assert scaled.m == base.m
    assert scaled.m_offsets == base.m_offsets
    assert scaled.g == base.g
    if base.m_offsets:
        assert scaled.omega_c == lam * base.omega_c


def test_doppler_identity():
    cfg = preset("bichromatic_four_wave", detuning=10)
    assert doppler_shift(cfg, (0, 0, 0)) == cfg


def test_doppler_single_wave():
    cfg = FieldConfig([PlaneWave(1.0, 0, 0.0, (1, 0, 0))])
    assert doppler_shift(cfg, (2, 0, 0)).detunings == (Fraction(-2),)


def test_doppler_bichromatic_signs():
    cfg = preset("bichromatic_four_wave", detuning=10)
    shifted = doppler_shift(cfg, (1, 0, 0))
    diffs = [a - b for a, b in zip(shifted.detunings, cfg.detunings)]
    # copropagating (+x) pair sees -k.v, counterpropagating pair +k.v
    for wave, diff in zip(cfg.waves, diffs):
        assert diff == -int(np.sign(wave.k[0]))
    assert diffs == [-1, -1, 1, 1]
    assert [w.rabi for w in shifted.waves] == [w.rabi for w in cfg.waves]
    assert [w.phase for w in shifted.waves] == [w.phase for w in cfg.waves]


def test_doppler_rationalizes():
    cfg = FieldConfig([PlaneWave(1.0, 10, 0.0, (1, 0, 0))], max_den=64)
    shifted = doppler_shift(cfg, (0.1, 0, 0))
    assert shifted.detunings[0] == Fraction(99, 10)
