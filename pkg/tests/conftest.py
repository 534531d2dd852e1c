import pytest

_VERDICTS = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _VERDICTS.append(("PASS" if report.passed else "FAIL", name, detail))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    from test_acceptance import TITLES

    terminalreporter.section("acceptance criteria")
    for verdict, name, detail in _VERDICTS:
        line = f"{verdict}  criterion {TITLES.get(name, name)}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
