import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from denjoy.blowup import BlowupModel
from denjoy.diffeo import DiffeoAction
from denjoy.lengths import LengthScheme, admissible_herman
from denjoy.modulus import Modulus
from denjoy.orbit import THETA_PRESETS, RotationAction

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = THETA_PRESETS["golden"]
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    return RotationAction((GOLDEN,))


@pytest.fixture(scope="session")
def herman_model(golden):
    scheme, _ = admissible_herman(Modulus.power(0.5), 10 ** 5)
    return BlowupModel.build(golden, scheme, radius=10 ** 5)


@pytest.fixture(scope="session")
def herman_act(herman_model):
    return DiffeoAction(herman_model)


@pytest.fixture(scope="session")
def small_model(golden):
    """Herman scheme on a ball of about 10^4 intervals."""
    scheme, _ = admissible_herman(Modulus.power(0.5), 5000)
    return BlowupModel.build(golden, scheme, radius=5000)


@pytest.fixture(scope="session")
def alpha_inv_model(golden):
    scheme = LengthScheme("alpha_inv", Modulus.power(0.5), 1, k=4)
    return BlowupModel.build(golden, scheme, radius=10 ** 5)


@pytest.fixture(scope="session")
def dkn_model():
    act = RotationAction((THETA_PRESETS["sqrt2m1"], THETA_PRESETS["sqrt3m1"]))
    scheme = LengthScheme("nu", Modulus.dkn(2, 0.1), 2, k=1000, scale=0.02)
    return BlowupModel.build(act, scheme, radius=120)


def circ(d):
    d = np.abs(np.asarray(d)) % 1.0
    return np.minimum(d, 1.0 - d)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300) if math.isfinite(b) else abs(a - b)
