import math

import pytest
from hypothesis import HealthCheck, settings

from upressure.systems import SystemSpec

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

LOG_LAMBDA = math.log((3 + math.sqrt(5)) / 2)


@pytest.fixture(scope="session")
def toral():
    return SystemSpec(family="LinearToral")


@pytest.fixture(scope="session")
def rotation():
    return SystemSpec(family="LinearTimesRotation", rotation_angle=0.33)


@pytest.fixture(scope="session")
def perturbed():
    return SystemSpec(family="PerturbedTimesRotation", rotation_angle=0.33, perturbation_amplitude=0.05)


@pytest.fixture(scope="session")
def all_systems(toral, rotation, perturbed):
    return [toral, rotation, perturbed]


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
