import numpy as np
import pytest

from switchlqr.model import LinearSwitchedSystem, Mode

A_EXP = np.array([[10.4, 0.0, -2.7], [5.2, -8.1, 8.3], [0.0, 0.4, -9.0]])
B_EXP = np.array([[-4.7, 6.1, -2.9], [-5.0, 5.8, 2.5], [2.9, 0.0, -7.2]])
Q_EXP = np.array([[6.5, -0.8, -1.4], [-0.8, 5.7, 2.6], [-1.4, 2.6, 25.0]])
R_EXP = np.array([[40.0, 10.0, 16.0], [10.0, 28.0, 8.0], [16.0, 8.0, 48.0]])
SIGMA_EXP = 0.003

K0_EXP = np.array([[1.23, 1.31, -0.35], [-0.27, 1.82, -0.84], [0.58, 0.77, -1.5]])


def make_experiment_system(sigma_w: float = SIGMA_EXP) -> LinearSwitchedSystem:
    """Benchmark plant with the two modes used by the reference workload."""
    return LinearSwitchedSystem(
        A=A_EXP, B=B_EXP, Q=Q_EXP, R=R_EXP, sigma_w=sigma_w,
        theta_bound=20.0, nu_bound=0.8, alpha0=4.0,
        modes=(Mode(1, (1, 2, 3)), Mode(2, (1, 2))))


def make_all_modes_system(sigma_w: float = SIGMA_EXP) -> LinearSwitchedSystem:
    """Same plant with the full actuator-subset catalog (looser cost bound)."""
    subsets = [(1, 2, 3), (1, 2), (1, 3), (2, 3), (1,), (2,), (3,)]
    modes = tuple(Mode(i + 1, acts) for i, acts in enumerate(subsets))
    return LinearSwitchedSystem(
        A=A_EXP, B=B_EXP, Q=Q_EXP, R=R_EXP, sigma_w=sigma_w,
        theta_bound=20.0, nu_bound=1000.0, alpha0=4.0, modes=modes)


@pytest.fixture(scope="session")
def experiment_system() -> LinearSwitchedSystem:
    return make_experiment_system()


@pytest.fixture(scope="session")
def all_modes_system() -> LinearSwitchedSystem:
    return make_all_modes_system()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(321)
