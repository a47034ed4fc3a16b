import numpy as np
import pytest

from mdlvq.labeling import build_labeling
from mdlvq.lattices import build_sublattice, make_lattice


@pytest.fixture(scope="session")
def z1():
    return make_lattice("Z1")


@pytest.fixture(scope="session")
def z2():
    return make_lattice("Z2")


@pytest.fixture(scope="session")
def a2():
    return make_lattice("A2")


_LABELINGS = {}


@pytest.fixture(scope="session")
def labeling_cache():
    """Memoized labeling builder shared across expensive tests."""

    def get(lattice_name: str, N: int, K: int, psi: float):
        key = (lattice_name, N, K, round(psi, 10))
        if key not in _LABELINGS:
            spec = build_sublattice(make_lattice(lattice_name), N)
            _LABELINGS[key] = build_labeling(spec, K, psi)
        return _LABELINGS[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
