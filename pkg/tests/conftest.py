"""
Shared fixtures: small seeded datasets and hand-built histories.
"""

import numpy as np
import pytest

from src.core.data import Dataset, DynamicSeries, EventHistory, Individual, build_grid
from src.data.simulate import gen_dataset_A, gen_dynamic_planted


@pytest.fixture
def grid4():
    return build_grid(100.0, 4)


@pytest.fixture
def toy_dataset():
    """Three individuals with staggered censoring on grid(100, 4)."""
    individuals = (
        Individual('a', [0.1, 0.2], EventHistory([10.0, 40.0], 100.0)),
        Individual('b', [0.7, 0.9], EventHistory([30.0], 60.0)),
        Individual('c', [0.4, 0.6], EventHistory([], 100.0)),
    )
    return Dataset(individuals, build_grid(100.0, 4), 'toy')


@pytest.fixture
def toy_dynamic_dataset():
    """Two individuals with one dynamic feature each."""
    individuals = (
        Individual('1', [0.2], EventHistory([5.0], 10.0),
                   (DynamicSeries([0.0, 5.0], [0.0, 1.0]),)),
        Individual('2', [0.8], EventHistory([2.0, 8.0], 10.0),
                   (DynamicSeries([0.0, 2.0, 6.0], [0.5, 0.25, 0.75]),)),
    )
    return Dataset(individuals, build_grid(10.0, 10), 'toy-dynamic')


@pytest.fixture(scope='session')
def small_a():
    return gen_dataset_A(n=80, seed=11)


@pytest.fixture(scope='session')
def small_planted():
    return gen_dynamic_planted(n=40, seed=5, m=20)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
