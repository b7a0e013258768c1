"""Shared fixtures; collects acceptance verdict lines for the final summary."""

import pytest

_verdicts = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Append ``[PASS]``/``[FAIL]`` lines here; they print after the run."""
    return _verdicts


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for line in _verdicts:
        terminalreporter.write_line(line)
