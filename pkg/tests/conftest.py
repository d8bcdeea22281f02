import pytest

from kikuchi_hsbm.model import ModelParams, sample, whitened_indicator


@pytest.fixture(scope="session")
def f24():
    return whitened_indicator(2, 4)


@pytest.fixture(scope="session")
def small_planted(f24):
    return sample(ModelParams(8, 2, 4, 0.3, 0.2), f24, True, 11)


@pytest.fixture(scope="session")
def small_null(f24):
    return sample(ModelParams(8, 2, 4, 0.3, 0.2), f24, False, 11)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
