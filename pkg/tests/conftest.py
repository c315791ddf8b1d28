import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one PASS/FAIL line per acceptance criterion as it completes."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or not item.module.__name__.endswith("test_acceptance"):
        return
    reporter = item.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is None:
        return
    status = "PASS" if report.passed else "FAIL"
    reporter.write_line(f"[{status}] {item.name}")
