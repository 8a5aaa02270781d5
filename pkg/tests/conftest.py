import contextlib

import pytest

# One line per acceptance criterion, filled in by ``criterion`` below.
ACCEPTANCE: dict[int, str] = {}


@contextlib.contextmanager
def criterion(number: int, title: str, details: dict):
    """Record PASS/FAIL for an acceptance criterion; ``details`` is filled
    in by the test with the measured quantities."""
    try:
        yield
    except BaseException:
        ACCEPTANCE[number] = _line(number, "FAIL", title, details)
        raise
    ACCEPTANCE[number] = _line(number, "PASS", title, details)


def _line(number, status, title, details):
    measured = ", ".join(f"{k}={_fmt(v)}" for k, v in details.items())
    return f"[{status}] criterion {number:2d}: {title}" + (f" ({measured})" if measured else "")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


@pytest.fixture
def record():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
