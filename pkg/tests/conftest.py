import numpy as np
import pytest
from hypothesis import strategies as st

from treeattr import fixtures, synthetic


@pytest.fixture
def model_a():
    return fixtures.model_a()


@pytest.fixture
def model_b():
    return fixtures.model_b()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def ensembles_and_inputs(draw, max_features=6, max_depth=5, max_trees=4):
    """(ensemble, x) from a drawn seed; hypothesis shrinks toward small models."""
    seed = draw(st.integers(0, 2**32 - 1))
    M = draw(st.integers(1, max_features))
    T = draw(st.integers(1, max_trees))
    D = draw(st.integers(0, max_depth))
    rng = np.random.default_rng(seed)
    ens = synthetic.random_ensemble(rng, T, D, M)
    x = rng.uniform(-0.1, 1.1, M)
    return ens, x


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
