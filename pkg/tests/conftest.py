import pytest

_LINES: dict[int, str] = {}


class CriterionReport:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, number: int, passed: bool, detail: str) -> None:
        line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}"
        _LINES[number] = line
        print(line)


@pytest.fixture(scope="session")
def report():
    return CriterionReport()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
