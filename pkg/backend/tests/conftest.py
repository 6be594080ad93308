from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner

from g3m.pool import PoolState


@pytest.fixture(scope="module")
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def intro_pool() -> PoolState:
    return PoolState(reserves=np.array([10.0, 10.0]), weights=np.array([1 / 3, 2 / 3]))


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "scenarios"
