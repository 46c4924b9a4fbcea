import numpy as np
import pytest

from surprisal.core import timeline_from_rows


@pytest.fixture
def two_bin():
    """T1 = (0.5, 0.5, 0), T2 = (0.5, 0, 0.5) over features a, b, c."""
    return timeline_from_rows("abc", [{"a": 0.5, "b": 0.5}, {"a": 0.5, "c": 0.5}],
                              labels=["t1", "t2"])


@pytest.fixture
def rng():
    return np.random.default_rng(20250515)
