import numpy as np
import pytest

from catamva.synth import write_toy_fixtures


@pytest.fixture(scope="session")
def toy(tmp_path_factory):
    return write_toy_fixtures(tmp_path_factory.mktemp("toy"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
