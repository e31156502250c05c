"""Shared pytest plumbing: the acceptance-criteria verdict board.

Acceptance tests record one line per criterion; pytest normally swallows
stdout of passing tests, so the recorded lines are replayed in the
terminal summary where they are always visible.
"""

VERDICTS: list = []


def record_verdict(criterion: int, passed: bool, detail: str) -> None:
    line = f"[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
    VERDICTS.append((criterion, line))
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(VERDICTS):
        terminalreporter.write_line(line)
