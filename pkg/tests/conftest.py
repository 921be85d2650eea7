import pytest

_KEY = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """``record(n, passed, detail)`` stores one acceptance line for the summary."""
    lines = request.config.stash.setdefault(_KEY, [])

    def add(n, passed, detail):
        line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)

    return add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
