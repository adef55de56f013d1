import pytest

from stokesbiot import build_discretization
from stokesbiot.driver import RunConfig, build_systems
from stokesbiot.params import PhysicalParams

# (criterion, passed, detail) tuples appended by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def disc4():
    return build_discretization(4)


@pytest.fixture(scope="session")
def params():
    return PhysicalParams(dt=0.01)


@pytest.fixture(scope="session")
def systems4():
    return build_systems(RunConfig(n=4, dt=0.01, T=0.01))
