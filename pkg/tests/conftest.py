import numpy as np
import pytest

from aircomp import make_instance


def random_instance(rng: np.random.Generator, K: int | None = None,
                    uniform_c: bool = False):
    """Random feasible instance with moderately varied parameters."""
    if K is None:
        K = int(rng.integers(1, 9))
    h = rng.uniform(0.1, 3.0, size=K)
    b_max = rng.uniform(0.2, 5.0, size=K)
    c = np.ones(K) if uniform_c else rng.uniform(0.2, 5.0, size=K)
    D = rng.uniform(10.0, 500.0, size=K)
    S_T = rng.uniform(0.3, 1.0) * float(D.sum())
    sigma2 = rng.uniform(0.1, 4.0)
    return make_instance(h=h, b_max=b_max, c=c, D=D, S_T=S_T, sigma2=sigma2)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
