import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from catalog import instantiate_entry  # noqa: E402
from construct import Grid, LevelPair  # noqa: E402
from exprlang import ParsedFunction  # noqa: E402

# entries whose default parameters give a normalizable construction
BUILDABLE = ("harmonic", "harmonic13", "quartic", "decatic", "sextic", "hyperbolic")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def harmonic():
    return ParsedFunction.from_text("x"), LevelPair(1.0, 3.0)


@pytest.fixture
def harmonic_grid():
    return Grid.uniform(-8.0, 8.0, 4001)


@pytest.fixture(params=BUILDABLE)
def instance(request):
    return instantiate_entry(request.param)


def grid_with_step(domain, h):
    """Odd-sized uniform grid on ``domain`` with spacing at most ``h``."""
    n = int(np.ceil((domain[1] - domain[0]) / h)) + 1
    n += 1 - n % 2
    return Grid.uniform(domain[0], domain[1], n)


def sign_changes(points, values, floor=1e-6):
    """Linearly interpolated crossings of ``values`` through zero, ignoring the tails."""
    keep = np.abs(values) > floor * np.max(np.abs(values))
    x, v = points[keep], values[keep]
    cells = np.nonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0]
    return x[cells] - v[cells] * (x[cells + 1] - x[cells]) / (v[cells + 1] - v[cells])
