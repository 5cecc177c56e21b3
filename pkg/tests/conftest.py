import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _criteria


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for line in _criteria:
        terminalreporter.write_line(line)
