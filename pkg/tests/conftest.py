import pytest

from spectrum_bundling.wardrop import warm_up


@pytest.fixture(scope="session", autouse=True)
def compiled_kernel():
    """Compile the solver kernel once so timed tests measure solving, not compiling."""
    warm_up()
