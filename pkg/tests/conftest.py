import pytest

acceptance_lines: list[str] = []


@pytest.fixture
def criterion_report():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def _report(name: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        acceptance_lines.append(line)
        assert passed, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
