import numpy as np
import pytest

from edgeprint import kernels, pipeline

ACCEPTANCE = []


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# rise-minus-fall offsets 40 ns (two ticks) apart
SEPARATED_OFFSETS = [17, 57, 97, 137, 177, 217, 257]
FLEET_PPMS = [-80, -40, 0, 30, 60, 90, -20]


@pytest.fixture(scope="session")
def fleet():
    return pipeline.synthetic_fleet(SEPARATED_OFFSETS, ppms=FLEET_PPMS)


@pytest.fixture(scope="session")
def fleet_rows(fleet):
    return pipeline.feature_rows(pipeline.simulate(fleet, 1000, 2024))


@pytest.fixture
def record_acceptance():
    def record(number, name, passed, detail):
        ACCEPTANCE.append((number, name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE, key=lambda r: (r[0], r[1])):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name}: {detail}")
