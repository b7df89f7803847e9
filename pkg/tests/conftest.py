"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from shiftwatch import Dataset


@pytest.fixture
def five_point() -> Dataset:
    """Small hand-checkable dataset used across selector and source-rate
    tests: two high-error rows, one mid score on a low-error row."""
    features = np.arange(10, dtype=float).reshape(5, 2)
    errors = np.array([0.1, 0.2, 0.3, 0.8, 0.9])
    scores = np.array([0.05, 0.5, 0.1, 0.6, 0.7])
    return Dataset(features, errors, scores)


@pytest.fixture
def correlated_dataset() -> Dataset:
    """Medium dataset whose scores rank errors well but not perfectly."""
    rng = np.random.default_rng(42)
    n = 400
    errors = rng.random(n) * 0.9
    scores = errors + rng.normal(0.0, 0.05, n)
    features = rng.random((n, 3))
    return Dataset(features, errors, scores)
