"""Shared fixtures: reference environments and frozen seed vectors."""

import json
import pathlib

import pytest

import rwre

DATA = pathlib.Path(__file__).parent / "data"

# one line per acceptance criterion, echoed after the test summary so the
# verdicts survive pytest's output capture
_criterion_lines = []


def record_criterion(line: str) -> None:
    _criterion_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def seed_vectors():
    with open(DATA / "seed_vectors.json") as fh:
        return json.load(fh)


def _load(name):
    return rwre.load_env(str(DATA / name))


@pytest.fixture(scope="session")
def env_half():
    """Binary tree, every edge weight 1/2: null recurrent."""
    return _load("env_binary_half.json")


@pytest.fixture(scope="session")
def env_04():
    """Binary tree, weight 0.4: positive recurrent."""
    return _load("env_binary_04.json")


@pytest.fixture(scope="session")
def env_07():
    """Binary tree, weight 0.7: transient."""
    return _load("env_binary_07.json")


@pytest.fixture(scope="session")
def env_updrift():
    """Binary tree, weights {2 w.p. 0.1, 1/3 w.p. 0.9}: subdiffusive."""
    return _load("env_updrift_mix.json")


@pytest.fixture(scope="session")
def env_critical():
    """Solved so that E[sum A] = 1 and E[sum A log A] = 0."""
    return _load("env_critical.json")


@pytest.fixture(scope="session")
def env_sparse():
    """Random offspring {0, 1, 3} with mixed weights: subdiffusive."""
    return _load("env_sparse_mix.json")
