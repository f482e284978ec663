import numpy as np
import pytest

import rollwin as rw


@pytest.fixture(scope="session")
def toy_config():
    return rw.PRESET_TOY


@pytest.fixture(scope="session")
def toy_weights(toy_config):
    return rw.init_random(toy_config, 42)


def random_tokens(n, seed, vocab=256):
    rng = np.random.default_rng(seed)
    return [int(t) for t in rng.integers(0, vocab, size=n)]
