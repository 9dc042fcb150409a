from __future__ import annotations

import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion_line():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def record(line: str) -> None:
        _LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
