import numpy as np
import pytest

_REPORT = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""
    def record(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        _REPORT.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
