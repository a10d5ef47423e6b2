import numpy as np
import pytest

from seqnav import autograd as ag
from seqnav.world import WorldConfig, build_vocabulary, generate_house, sample_episode


@pytest.fixture
def f64():
    with ag.precision(np.float64):
        yield


@pytest.fixture(scope="session")
def vocab():
    return build_vocabulary(WorldConfig().room_taxonomy_size)


@pytest.fixture(scope="session")
def house():
    return generate_house(7)


@pytest.fixture(scope="session")
def episodes(house, vocab):
    return [sample_episode(house, s, vocab=vocab) for s in range(6)]


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
