import math

import pytest

from atomforce import FieldConfig, PlaneWave, preset

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def single_resonant():
    return preset("single", rabi=1.0, detuning=0)


@pytest.fixture
def bichromatic():
    return preset("bichromatic_four_wave", detuning=10)


@pytest.fixture
def two_tone():
    return FieldConfig([PlaneWave(2.0, 3, 0.7, (1, 0, 0)),
                        PlaneWave(1.5, -1, 2.1, (-1, 0, 0))])


@pytest.fixture
def zero_field():
    return FieldConfig([PlaneWave(0.0, 0.3, 0.0, (1, 0, 0))])


def bichromatic_waves(detuning=10.0, rabi=None):
    rabi = math.sqrt(1.5) * detuning if rabi is None else rabi
    return preset("bichromatic_four_wave", detuning=detuning, rabi=rabi)
