import numpy as np
import pytest

from qtmlab import Discrete, ProblemSpec


def example1_dist(p: float = 0.501) -> Discrete:
    """Three alternatives, two opposed camps with a shared compromise."""
    return Discrete(probs=np.array([p, 1.0 - p]),
                    atoms=np.array([[3.0, 2.0, 0.0], [0.0, 2.0, 3.0]]))


def example1_spec(n: int = 300, c: float = 1.0) -> ProblemSpec:
    return ProblemSpec(m=3, n=n, c=c, u_max=3.0)


def two_type_dist() -> Discrete:
    """Symmetric two-alternative instance used for oracle cross-checks."""
    return Discrete(probs=np.array([0.5, 0.5]),
                    atoms=np.array([[1.0, 0.0], [0.0, 1.0]]))


def trend_dist() -> Discrete:
    """m=3 instance with mean gaps of 0.5; the middle value is the coin flip."""
    return Discrete(probs=np.array([0.5, 0.5]),
                    atoms=np.array([[1.0, 0.4, 0.0], [1.0, 0.6, 0.0]]))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
