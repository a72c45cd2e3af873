import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gappycomfort import gappy_pod, sim, snapshots  # noqa: E402
from gappycomfort.config import CliConfig  # noqa: E402
from acceptance_log import RESULTS  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: int(k[2:])):
        terminalreporter.write_line(RESULTS[key])


@pytest.fixture(scope="session")
def cfg():
    return CliConfig.load()


@pytest.fixture(scope="session")
def grid():
    return snapshots.Grid()


@pytest.fixture(scope="session")
def dataset(cfg):
    """Reference 50-scenario dataset with the default model noise."""
    return sim.generate_snapshot_dataset(cfg.model, cfg.scenarios, seed=0)


@pytest.fixture(scope="session")
def split(cfg, dataset):
    return snapshots.split_train_validation(dataset, cfg.validation_specs)


@pytest.fixture(scope="session")
def basis(split):
    return gappy_pod.build_basis(split[0], 5)


@pytest.fixture(scope="session")
def plan(grid):
    return gappy_pod.make_sampling_plan(grid, "boundary_uniform", 12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
