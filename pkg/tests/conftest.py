import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pdg import io
from pdg.model import build

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str):
    return io.load(fixture_path(name))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def floomp():
    return load_fixture("floomp.pdg.json")


@pytest.fixture
def overdet():
    return load_fixture("overdet.pdg.json")


@pytest.fixture
def two_priors():
    return build(
        {"1": ["⋆"], "X": ["x1", "x2"]},
        [("p", "1", "X", [[0.7, 0.3]]), ("q", "1", "X", [[0.2, 0.8]])],
    )


@pytest.fixture(autouse=True)
def _quiet_expected_warnings():
    # solver and translation warnings are asserted explicitly where they matter
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


# one line per acceptance criterion, printed after the run
GATE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance gate")
        for line in sorted(GATE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
