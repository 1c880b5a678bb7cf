import numpy as np
import pytest

from tlammcox import SurvivalDataset


@pytest.fixture
def two_point():
    """times (1,2), both events, single covariate (1,0): risk sets {0,1}, {1}."""
    return SurvivalDataset([1.0, 2.0], [1, 1], np.array([[1.0], [0.0]]))


def random_dataset(rng, n, p, censor_frac=0.3):
    """Small random instance with mixed censoring and no tied times."""
    times = rng.exponential(1.0, size=n) + 1e-3
    status = (rng.uniform(size=n) > censor_frac).astype(int)
    if status.sum() == 0:
        status[int(rng.integers(n))] = 1
    x = rng.standard_normal((n, p))
    return SurvivalDataset(times, status, x)
