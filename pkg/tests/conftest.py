import warnings

import pytest
from hypothesis import HealthCheck, settings

from afz.config import bundled_path, load_config
from afz.converter import ConverterParams

# the simulator and solvers are slow per example; no per-example deadline
settings.register_profile("afz", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("afz")


@pytest.fixture(scope="session")
def proto_cfg():
    return load_config(bundled_path())


@pytest.fixture
def proto():
    return ConverterParams.prototype()


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


# verdict lines from the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
