import numpy as np
import pytest

from latentrec.model import LatentWorld, ModelConfig


def make_world(user_types, pref, item_types, seed=0):
    """World with explicit user types, preference matrix and leading item types."""
    pref = np.asarray(pref, np.int8)
    config = ModelConfig(len(user_types), pref.shape[0], pref.shape[1], seed)
    return LatentWorld(config, np.asarray(user_types), pref, np.asarray(item_types))


@pytest.fixture
def world_factory():
    return make_world
