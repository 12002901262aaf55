import numpy as np
import pytest

from nsegment import ImagePlane, LabelMask, SamplePair


def random_mask(rng, width=16, height=16, classes=4, ignore_fraction=0.0):
    values = rng.integers(0, classes, size=(height, width)).astype(np.uint8)
    if ignore_fraction > 0:
        holes = rng.random((height, width)) < ignore_fraction
        values[holes] = 255
    return LabelMask(values=values, classes=classes)


def ramp_image(width=16, height=16, channels=1):
    base = np.arange(width * height, dtype=np.int64).reshape(height, width) % 256
    samples = np.stack([(base + 31 * c) % 256 for c in range(channels)], axis=2)
    return ImagePlane(samples=samples.astype(np.uint8))


def random_pair(rng, width=16, height=16, classes=4, channels=3, sample_id=0, epoch=0):
    image = ImagePlane(
        samples=rng.integers(0, 256, size=(height, width, channels)).astype(np.uint8)
    )
    mask = random_mask(rng, width, height, classes)
    return SamplePair(image=image, mask=mask, sample_id=sample_id, epoch=epoch)


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


def structured_mask(width=96, height=96, classes=4):
    """Deterministic fixture with blocks, a disk, and a stripe; used where a
    'typical' annotation layout matters (previews, diff counts)."""
    values = np.zeros((height, width), dtype=np.uint8)
    values[10:40, 8:44] = 1
    values[55:90, 50:88] = 2
    yy, xx = np.mgrid[0:height, 0:width]
    values[(yy - 30) ** 2 + (xx - 70) ** 2 <= 144] = 3
    values[70:76, 4:40] = 3
    return LabelMask(values=values, classes=classes)


def structured_pair(width=96, height=96):
    mask = structured_mask(width, height)
    ramp = ramp_image(width, height, channels=3)
    return SamplePair(image=ramp, mask=mask, sample_id=0, epoch=0)
