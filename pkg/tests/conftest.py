import pytest

_LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_LINES] = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.stash[_LINES]

    def record(number, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number:>2}: {status}  {detail}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_LINES]
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
