import pytest

from chifourier import phi as phimod

# (criterion, passed, detail) lines collected by test_acceptance
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def phi0():
    return phimod.build_phi(0)


@pytest.fixture(scope="session")
def phi1():
    return phimod.build_phi(1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
