import pytest

from rbmdos import grid as gr

# (criterion number, line) pairs filled by test_acceptance
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def quick_grid_w8():
    return gr.quick_grid(1.0, 8)


@pytest.fixture(scope="session")
def grid_w4():
    return gr.build_grid(1.0, 4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
