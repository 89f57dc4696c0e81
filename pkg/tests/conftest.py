"""Shared pytest hooks: prints one PASS/FAIL line per acceptance criterion."""

_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    _acceptance_results.append((name, status, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status, duration in _acceptance_results:
        terminalreporter.write_line(f"[{status}] {name} ({duration:.1f}s)")
