"""Shared pytest wiring.

The acceptance tests append one line per criterion to a list stored on
the pytest config; the hook below prints those lines in a dedicated
section at the end of the run so the verdict survives output capture.
"""


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
