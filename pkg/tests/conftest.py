import pytest

from fbhfs.precision import make_context


@pytest.fixture(scope="session")
def ctx():
    return make_context(64)


@pytest.fixture(scope="session")
def ctx40():
    return make_context(40)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
