"""Shared pytest hooks.

The acceptance module reports one verdict line per criterion; collecting
them here and replaying them in the terminal summary keeps the verdicts
visible regardless of output capturing.
"""

criterion_lines = []


def pytest_terminal_summary(terminalreporter):
    if criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in criterion_lines:
            terminalreporter.write_line(line)
