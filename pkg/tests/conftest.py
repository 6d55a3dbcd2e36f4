import pytest

_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(k, ok, detail)``."""
    lines = request.config.stash.setdefault(_KEY, {})

    def record(k, ok, detail=""):
        lines[k] = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
