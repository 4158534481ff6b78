"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

import pytest

_RESULTS: dict[int, tuple[str, str, list]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    n, title = marker.args
    status = "PASS" if report.passed else "FAIL"
    _RESULTS[n] = (status, title, [f"{k}={v}" for k, v in report.user_properties])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, title, details = _RESULTS[n]
        line = f"criterion {n:2d}: {status}  {title}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
