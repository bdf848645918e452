import warnings

import pytest

ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(autouse=True)
def _quiet_size_warning():
    # small generated instances routinely trip the q + p > n/4 advisory
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*q \\+ p.*")
        yield
