"""Collects one status line per acceptance criterion and prints them after the run."""
import pytest

ACCEPTANCE: dict[int, tuple[str, str]] = {}


def record(criterion: int, detail: str) -> None:
    """Attach a measured-values summary to the criterion's status line."""
    ACCEPTANCE[criterion] = ("", detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    crit = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        detail = ACCEPTANCE.get(crit, ("", ""))[1]
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2].removeprefix("Skipped: ")
        ACCEPTANCE[crit] = (status, detail)
    elif report.when == "setup" and report.failed:
        ACCEPTANCE[crit] = ("FAIL", "setup error")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[crit]
        terminalreporter.write_line(f"criterion {crit}: {status}  {detail}".rstrip())
