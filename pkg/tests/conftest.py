import pytest

# acceptance tests register one line per criterion here; the summary hook
# replays them after the run so pass/fail is visible without -s
_CRITERION_LINES = []


@pytest.fixture
def criterion():
    def record(line):
        print(line)
        _CRITERION_LINES.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
