import time
from contextlib import contextmanager

import pytest

_LINES: list[str] = []


class Criterion:
    """Times a check and records one PASS/FAIL line for the terminal summary."""

    @contextmanager
    def __call__(self, number: int, title: str, budget: float):
        t0 = time.perf_counter()
        detail = []
        ok = False
        try:
            yield detail
            ok = True
        finally:
            dt = time.perf_counter() - t0
            if dt > budget:
                ok = False
                detail.append(f"over budget {budget:g}s")
            line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  ({dt:.1f}s) {'; '.join(detail)}"
            _LINES.append(line)
            print(line)
        assert dt <= budget, f"runtime {dt:.1f}s exceeds {budget:g}s"


@pytest.fixture
def criterion():
    return Criterion()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
