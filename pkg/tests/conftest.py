"""Shared pytest plumbing: the acceptance suite registers one PASS/FAIL
line per criterion and they are echoed in the terminal summary."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
