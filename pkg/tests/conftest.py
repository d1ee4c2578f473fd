import pytest

_LINES: list[tuple[str, str, str]] = []


@pytest.fixture
def record(request):
    """Collect a one-line summary of observed values for the terminal report."""

    def _record(text: str):
        _LINES.append((request.node.name, text, ""))

    yield _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        for i, (name, text, _) in enumerate(_LINES):
            if name == item.name:
                _LINES[i] = (name, text, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance summary")
    for name, text, status in _LINES:
        terminalreporter.write_line(f"{status or '?':4s}  {name}: {text}")
