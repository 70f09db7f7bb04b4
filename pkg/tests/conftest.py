import numpy as np
import pytest

from tracelab.stats import RngStream


@pytest.fixture
def rng() -> np.random.Generator:
    return RngStream(20240817).generator()


def stream(*path: int) -> np.random.Generator:
    return RngStream(20240817, tuple(path)).generator()
