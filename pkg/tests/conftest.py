import pytest

from manyone.core import ChannelConfig


@pytest.fixture
def worked():
    return ChannelConfig(3, [4, 9], [4, 2, 20])


ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line; call with ``(number, ok, detail)``."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
