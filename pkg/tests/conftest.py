import numpy as np
import pytest

from seaqugan.data_pipeline import bundled_dataset

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def dataset():
    return bundled_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
