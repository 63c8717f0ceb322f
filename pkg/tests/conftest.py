import numpy as np
import pytest
from hypothesis import settings

from causal_cvar import harness
from causal_cvar.model import two_context_model

settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def t1_model():
    return two_context_model()


@pytest.fixture(scope="session")
def t1_config():
    return harness.two_context_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
