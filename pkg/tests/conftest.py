import numpy as np
import pytest

from ttgreeks.tensor_train import TensorTrain


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_tt(rng, dims, bonds, scale=1.0):
    """Random complex train with the given local dims and interior bonds."""
    full = [1] + list(bonds) + [1]
    cores = [scale * (rng.normal(size=(full[i], dims[i], full[i + 1]))
                      + 1j * rng.normal(size=(full[i], dims[i], full[i + 1])))
             for i in range(len(dims))]
    return TensorTrain(cores)
