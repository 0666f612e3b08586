import pytest

_outcomes: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _outcomes.get(number)
        status = "FAIL" if failed or (prev and prev[0] == "FAIL") else "PASS"
        _outcomes[number] = (status, title, report.duration + (prev[2] if prev else 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title, seconds = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}  ({seconds:.1f}s)")
