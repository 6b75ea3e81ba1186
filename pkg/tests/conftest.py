import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_image(rng, h, w, channels=3):
    shape = (h, w, channels) if channels == 3 else (h, w)
    return rng.uniform(0.0, 1.0, shape)
