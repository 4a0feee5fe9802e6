import numpy as np
import pytest

from dssbo import _accel


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run the test once per compute backend, restoring the original after."""
    before = _accel.backend()
    _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(before)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
