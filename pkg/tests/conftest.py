import pytest

from anomae import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted conv kernels once so tests time algorithms, not LLVM."""
    _kernels.warmup()
