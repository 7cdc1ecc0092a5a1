import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def test_image(gen):
    """Fixed 64x64 RGB image with a gradient and some texture."""
    yy, xx = np.mgrid[0:64, 0:64] / 63.0
    img = np.stack([yy, xx, 0.5 * (yy + xx)], axis=-1) * 0.8
    return np.clip(img + gen.uniform(0, 0.1, img.shape), 0.0, 1.0)
