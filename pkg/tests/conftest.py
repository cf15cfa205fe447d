import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from pixhom.raster import Raster

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def distinct_raster(h, w, seed=0, scale=1.0):
    """h x w raster whose values are a random permutation of distinct floats."""
    rng = np.random.default_rng(seed)
    vals = rng.permutation(h * w).astype(np.float32) * np.float32(scale)
    return Raster(vals.reshape(h, w))


@st.composite
def distinct_rasters(draw, max_side=9):
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    seed = draw(st.integers(0, 2**32 - 1))
    return distinct_raster(h, w, seed)


@st.composite
def small_int_rasters(draw, max_side=8, levels=5):
    """Plateau-heavy rasters: few distinct values, so ties everywhere."""
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    vals = draw(st.lists(st.integers(0, levels - 1), min_size=h * w, max_size=h * w))
    return Raster(np.array(vals, dtype=np.float32).reshape(h, w))


@pytest.fixture(autouse=True)
def _quiet_ties():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield
