import pytest

from exactot.bench import warmup


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile (or load from cache) every numba kernel once per session."""
    warmup()
