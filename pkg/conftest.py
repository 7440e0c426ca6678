"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from orthotropic_shared.geometry import build_grid


@pytest.fixture
def grid17():
    return build_grid(17, 2.0)


@pytest.fixture
def grid33():
    return build_grid(33, 2.0)


@pytest.fixture
def grid65():
    return build_grid(65, 2.0)


@pytest.fixture
def grid129():
    return build_grid(129, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
