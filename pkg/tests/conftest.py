"""Shared fixtures: small seeded systems used across the test modules."""
import numpy as np
import pytest

from stochinput import LtiSystem
from stochinput.bench import TrueInputModel, build_heat_system, HeatModel


def random_stable_system(n, p, q, radius=0.8, seed=0):
    """Random real system scaled to a prescribed spectral radius."""
    rng = np.random.default_rng(seed)
    A_raw = rng.normal(size=(n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A_raw)))
    A = A_raw * (radius / rho)
    B = rng.normal(size=(n, p))
    C = rng.normal(size=(q, n))
    return LtiSystem(A=A, B=B, C=C, Omega=0.1 * np.eye(q))


@pytest.fixture
def small_system():
    return random_stable_system(4, 2, 2, radius=0.8, seed=7)


@pytest.fixture
def colored_input_model():
    """Two-channel stationary input with geometrically decaying correlations."""
    return TrueInputModel(
        A_e=np.array([[0.7, 0.2], [0.1, 0.6]]),
        B_e=np.eye(2),
        C_e=np.eye(2),
        cov_state=np.eye(2),
        cov_direct=np.zeros((2, 2)),
    )


@pytest.fixture(scope="session")
def heat_system():
    return build_heat_system(HeatModel())
