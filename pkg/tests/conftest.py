import numpy as np
import pytest

from levyito import _kernels
from levyito.measure import AtomicMeasure, LevyTriplet


@pytest.fixture
def mixed_triplet():
    """a = 0, Q = [[1]], unit atoms at +1 and -1."""
    return LevyTriplet(0.0, 1.0, AtomicMeasure.from_atoms([(1.0, 1.0), (-1.0, 1.0)]))


@pytest.fixture
def two_atom_truth():
    return LevyTriplet(0.7, 0.25, AtomicMeasure.from_atoms([(-2.0, 0.5), (1.5, 1.0)]))


@pytest.fixture(params=_kernels.available_backends())
def backend(request):
    previous = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
