import numpy as np
import pytest
from hypothesis import settings

from vesselsplit.rotations import quat_from_euler
from vesselsplit.vessel_model import ControlConfig, State, VesselParams

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return VesselParams()


@pytest.fixture(scope="session")
def ctrl():
    return ControlConfig()


def random_state(rng, omega_scale=0.2, pitch_max=1.2):
    """A generic state away from gimbal lock, in the range the scenario visits."""
    ang = rng.uniform([-0.5, -pitch_max, -np.pi], [0.5, pitch_max, np.pi])
    return State(omega=rng.normal(0.0, omega_scale, 3), q=quat_from_euler(ang),
                 v=rng.normal(0.0, 1.0, 3), x=np.array([780.0, 20.0, 0.0]) + rng.normal(0.0, 30.0, 3),
                 phi_theta=rng.normal(0.0, 1.0, 3), phi_x=rng.normal(0.0, 50.0, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled by test_acceptance and printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
