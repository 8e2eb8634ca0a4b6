import numpy as np
import pytest

from typicalset import BnChannelStats, FeatureBatch, LinearHead


@pytest.fixture
def unit_stats():
    return BnChannelStats(np.zeros(2), np.ones(2))


@pytest.fixture
def small_batch():
    return FeatureBatch(np.array([[2.5, 0.3], [-1.0, 0.0], [0.5, -3.0]]))


@pytest.fixture
def identity_head():
    return LinearHead(np.eye(2), np.zeros(2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
