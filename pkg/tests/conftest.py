import sys
from pathlib import Path

import pytest

# helper modules (_synth, _fakeclock) live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

_results: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        report.acceptance = tuple(m.args)
    return report


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    _, status, seconds = _results.get(number, (title, "PASS", 0.0))
    if report.failed:
        status = "FAIL"
    elif report.skipped and status != "FAIL":
        status = "SKIP"
    _results[number] = (title, status, seconds + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, status, seconds = _results[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({seconds:.1f}s)")
