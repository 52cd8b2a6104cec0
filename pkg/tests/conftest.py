import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance criteria pass/fail lines after the test run."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORTED", None) if module else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
