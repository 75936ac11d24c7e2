import numpy as np
import pytest

from xpmchannel.config import SimGrid, nominal_config


@pytest.fixture
def nominal():
    return nominal_config()


@pytest.fixture
def small_link():
    """Short four-channel link that keeps coupled runs cheap."""
    return nominal_config(n_channels=4, length_L=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def u_grid():
    # t - t' = 1 ps spans 100 samples
    return SimGrid(2.56, 256, 64)
