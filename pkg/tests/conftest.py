import numpy as np
import pytest

from mrbt.gridworld.env import make_schema
from mrbt.gridworld.spaces import make_task_space


@pytest.fixture(scope="session")
def schema():
    return make_schema(8)


@pytest.fixture(scope="session")
def doorkey6():
    return make_task_space("doorkey", 6)


@pytest.fixture(scope="session")
def doorkey8():
    return make_task_space("doorkey", 8)


@pytest.fixture(scope="session")
def lockedroom_mini():
    return make_task_space("lockedroom", "mini")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def acceptance_line(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
