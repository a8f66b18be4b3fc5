import numpy as np
import pytest

from nlperim.grid import GridFunction, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_function(grid, rng, interior_margin=0):
    """Random grid function, optionally zero within a margin of the box edge."""
    vals = rng.standard_normal(grid.shape)
    if interior_margin > 0:
        mask = np.zeros(grid.shape, dtype=bool)
        core = tuple(slice(interior_margin, n - interior_margin) for n in grid.shape)
        mask[core] = True
        vals = np.where(mask, vals, 0.0)
    return GridFunction(grid, vals)
