"""Collect acceptance outcomes and print one line per criterion at the end."""

import pytest

_OUTCOMES: dict[int, tuple[str, bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = getattr(item, "acceptance_detail", "")
    _OUTCOMES[number] = (title, report.passed, detail)


@pytest.fixture
def detail(request):
    """Let an acceptance test attach a short measurement summary."""

    def note(text: str) -> None:
        request.node.acceptance_detail = text

    return note


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, passed, detail = _OUTCOMES[number]
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
