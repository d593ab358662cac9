import pytest

from edgequery import _accel

BACKENDS = ["numba", "numpy"] if _accel.HAS_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per kernel backend."""
    with _accel.backend(request.param):
        yield request.param
