from __future__ import annotations

from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


class _Record:
    def __init__(self):
        self.ok = False
        self.detail = ""


@pytest.fixture
def criterion(request):
    """Context manager that logs one PASS/FAIL line and fails the test on FAIL."""
    lines = request.config.stash[_LINES]

    @contextmanager
    def run(number: int, title: str):
        rec = _Record()
        try:
            yield rec
        except Exception as exc:
            line = f"criterion {number:2d} FAIL  {title}: {type(exc).__name__}: {exc}"
            lines.append(line)
            print(line)
            raise
        line = f"criterion {number:2d} {'PASS' if rec.ok else 'FAIL'}  {title}: {rec.detail}"
        lines.append(line)
        print(line)
        assert rec.ok, line

    return run
