import itertools

import numpy as np
import pytest

from cubemix.models import ProductMixture, SubcubeMixture
from cubemix.rng import generator


def random_subcube_mixture(n: int, k: int, seed: int, uniform_bias: float = 0.34) -> SubcubeMixture:
    rng = generator(seed)
    raw = rng.dirichlet(np.ones(k) * 2.0)
    w = np.round(raw, 9)
    w[-1] = 1.0 - w[:-1].sum()
    probs = [(1 - uniform_bias) / 2, uniform_bias, (1 - uniform_bias) / 2]
    marg = rng.choice([0.0, 0.5, 1.0], size=(n, k), p=probs)
    return SubcubeMixture(w, marg)


def random_product_mixture(n: int, k: int, seed: int) -> ProductMixture:
    rng = generator(seed)
    raw = rng.dirichlet(np.ones(k) * 2.0)
    w = np.round(raw, 9)
    w[-1] = 1.0 - w[:-1].sum()
    return ProductMixture(w, rng.random((n, k)))


def subsets_upto(n: int, degree: int):
    for size in range(0, min(degree, n) + 1):
        yield from itertools.combinations(range(n), size)


@pytest.fixture
def rng():
    return generator(0)
