"""Shared fixtures: per-criterion pass/fail reporting for the acceptance suite."""

import contextlib
import time

import pytest

_LINES: list[str] = []


class CriterionChecks:
    def __init__(self):
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, ok: bool, message: str) -> bool:
        if not ok:
            self.failures.append(message)
        return ok

    def note(self, message: str) -> None:
        self.notes.append(message)


@pytest.fixture
def criterion():
    """``with criterion(3, "title") as c: c.check(cond, msg)`` prints one status line."""

    @contextlib.contextmanager
    def run(number: int, title: str, budget: float | None = None):
        checks = CriterionChecks()
        start = time.perf_counter()
        error = None
        try:
            yield checks
        except Exception as exc:  # reported, then re-raised below
            error = exc
            checks.failures.append(f"{type(exc).__name__}: {exc}")
        elapsed = time.perf_counter() - start
        if budget is not None and error is None:
            checks.check(elapsed < budget, f"runtime {elapsed:.1f} s exceeds {budget:g} s")
        status = "PASS" if not checks.failures else "FAIL"
        detail = "; ".join(checks.failures[:3] if checks.failures else checks.notes)
        line = f"criterion {number:2d} {status}  {title} [{elapsed:.1f} s] {detail}"
        _LINES.append(line)
        print(line)
        if error is not None:
            raise error
        assert not checks.failures, "\n".join(checks.failures)

    return run


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
