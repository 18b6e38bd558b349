import numpy as np
import pytest

from vqlink.quantizer import FitConfig, MultiLevelCodebook, fit

FIT_SHAPE = (4, 4, 8, 16)  # (D, P, N, n_q)


@pytest.fixture(scope="session")
def fitting_matrix():
    """10^4 standard Gaussian feature vectors, the synthetic fitting set."""
    rng = np.random.default_rng(123)
    return rng.standard_normal((10_000, 16))


@pytest.fixture(scope="session")
def fitted_mlc(fitting_matrix):
    return fit(fitting_matrix, FIT_SHAPE, FitConfig(seed=0))


@pytest.fixture(scope="session")
def fitting_grids(fitting_matrix):
    """The fitting set reshaped into 8x8 grids for link-level tests."""
    return [fitting_matrix[i * 64:(i + 1) * 64].reshape(8, 8, 16) for i in range(32)]


def nested_mlc(depth=3, p=2, n=8, head_dim=4, scale=0.05):
    """Scale-separated codebook: level d entries shrink by scale**d.

    The per-level minimum separation dominates the total norm of all
    deeper levels, so the greedy recursion provably recovers any exactly
    representable sum and small perturbations cannot flip decisions.
    Entries are hypercube vertices, min separation 2*scale**d per level.
    """
    verts = np.array([[1 if (k >> b) & 1 else -1 for b in range(head_dim)]
                      for k in range(n)], dtype=np.float64)
    arr = np.stack([
        np.stack([verts * (scale ** d) for _ in range(p)]) for d in range(1, depth + 1)
    ])
    return MultiLevelCodebook.from_array(arr)


@pytest.fixture()
def toy_nested_mlc():
    return nested_mlc()
