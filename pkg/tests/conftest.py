import pytest

_ACCEPTANCE = "test_acceptance.py"
_results: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if not item.nodeid.split("::")[0].endswith(_ACCEPTANCE):
        return
    label = (item.function.__doc__ or item.name).strip().splitlines()[0]
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _results.get(item.nodeid, (label, "PASS"))[1]
    if report.when == "call" or failed:
        _results[item.nodeid] = (label, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in _results.values():
        terminalreporter.write_line(f"{status}  criterion {label}")
