import pytest

_REPORT = []


@pytest.fixture
def report():
    """Record one acceptance status line: ``report(id, status, detail)``."""
    def add(cid, status, detail=""):
        _REPORT.append(f"{cid}: {status}  {detail}".rstrip())
    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
