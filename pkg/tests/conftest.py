import pytest
from hypothesis import HealthCheck, settings

from pwstpc import paillier
from pwstpc.encode import build_plan
from pwstpc.quantize import quantize_function, sinc_spec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# fit used for each degree when reproducing the segment table
FIT = {0: "plain", 1: "continuous", 2: "continuous"}


@pytest.fixture(scope="session")
def sinc8():
    return quantize_function(sinc_spec(8))


@pytest.fixture(scope="session")
def sinc12():
    return quantize_function(sinc_spec(12))


@pytest.fixture(scope="session")
def plans8(sinc8):
    return {d: build_plan(sinc8, d, 0.1, FIT[d]) for d in (0, 1, 2)}


@pytest.fixture(scope="session")
def keys512():
    return paillier.keygen(512, "test-keys", insecure_test_keys=True)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
