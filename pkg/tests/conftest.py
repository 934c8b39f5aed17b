import numpy as np
import pytest

from mflq.model import build_problem


SCALAR_CONFIG = {
    "A": 0.8, "B": 1.0, "G": -0.2, "Q": -0.1, "R": 1.0, "Gamma": 0.2,
    "rho": 0.6, "f": 1.0, "sigma": 0.2, "eta": 5.0,
    "init_mean": 5.0, "init_cov": 0.3,
}

PLANAR_CONFIG = {
    "A": [[0.1, 0.0], [-1.0, 0.2]],
    "B": [[1.0], [1.0]],
    "G": [[-0.5, 0.0], [0.0, -0.3]],
    "Q": [[1.0, 0.0], [0.0, 1.0]],
    "R": [[1.0]],
    "Gamma": [[1.0, 0.0], [1.0, 1.0]],
    "rho": 0.6,
    "f": [1.0, 1.0], "sigma": [0.5, 0.5], "eta": [0.0, 0.5],
    "init_mean": [5.0, 5.0], "init_cov": [[0.5, 0.0], [0.0, 0.5]],
}

# Comparison regime for the legacy-feedback equivalence: f = 0, G = 0.
REPRESENTATION_CONFIG = {
    "A": 0.5, "B": 1.0, "G": 0.0, "Q": 1.0, "R": 1.0, "Gamma": 0.5,
    "rho": 0.6, "f": 0.0, "sigma": 0.2, "eta": 1.0,
    "init_mean": 1.0, "init_cov": 0.1,
}

# Singular regime: A + G = rho/2 and Gamma = 1, so the averaged Riccati
# equation collapses to Pi = 0 and the mean-field flow sits on the
# discount boundary.
SINGULAR_CONFIG = {
    "A": 0.8, "B": 1.0, "G": -0.5, "Q": 1.0, "R": 1.0, "Gamma": 1.0,
    "rho": 0.6, "f": 1.0, "sigma": 0.2, "eta": 5.0,
    "init_mean": 5.0, "init_cov": 0.3,
}


@pytest.fixture(scope="session")
def scalar_problem():
    return build_problem(SCALAR_CONFIG)


@pytest.fixture(scope="session")
def planar_problem():
    return build_problem(PLANAR_CONFIG)


@pytest.fixture(scope="session")
def representation_problem():
    return build_problem(REPRESENTATION_CONFIG)


@pytest.fixture(scope="session")
def singular_problem():
    return build_problem(SINGULAR_CONFIG)


def scalar_variant(**overrides):
    cfg = dict(SCALAR_CONFIG)
    cfg.update(overrides)
    return build_problem(cfg)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
