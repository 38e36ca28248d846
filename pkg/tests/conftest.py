import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(number: int, line: str):
        _ACCEPTANCE[number] = line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
