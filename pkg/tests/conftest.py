import numpy as np
import pytest

from rbcover import DataMatrix, MetricSpec


@pytest.fixture(scope="session")
def line_points() -> DataMatrix:
    """Five 1-dim points at 0, 2, 5, 6, 9 (ids 0..4); easy to trace by hand."""
    return DataMatrix(np.array([[0.0], [2.0], [5.0], [6.0], [9.0]], dtype=np.float32))


@pytest.fixture(scope="session")
def spec1() -> MetricSpec:
    return MetricSpec("l2", 1)


@pytest.fixture(scope="session")
def uniform8() -> DataMatrix:
    rng = np.random.default_rng(101)
    return DataMatrix(rng.random((2000, 8), dtype=np.float32))


@pytest.fixture(scope="session")
def spec8() -> MetricSpec:
    return MetricSpec("l2", 8)
