"""Shared pytest hooks.

The acceptance tests double as a go/no-go report: after the run, one
PASS/FAIL line per acceptance criterion is appended to the terminal
summary so the outcome is visible even in non-verbose output.
"""


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" in rep.nodeid and rep.when == "call":
                name = rep.nodeid.split("::")[-1]
                tag = "PASS" if outcome == "passed" else "FAIL"
                lines.append(f"{tag} {name}")
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in sorted(lines):
            terminalreporter.write_line(line)
