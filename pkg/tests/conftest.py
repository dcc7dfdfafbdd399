import numpy as np
import pytest

from clinker.annotations.annotation_instance_types import AnnotatedImage, ParticleInstance
from clinker.raster.raster_pixel_grid_types import BinaryMask, LabelMap, PhaseLabel
from clinker.raster.raster_synthetic_microstructure import generate_synthetic_microstructure


@pytest.fixture(scope="session")
def synthetic_micrograph():
    return generate_synthetic_microstructure(width=300, height=300, seed=0)


@pytest.fixture(scope="session")
def small_micrograph():
    return generate_synthetic_microstructure(width=120, height=120, seed=3, alite_count=4, belite_count=5)


def rectangle_mask(width, height, x, y, w, h):
    bits = np.zeros((height, width), dtype=bool)
    bits[y:y + h, x:x + w] = True
    return BinaryMask(bits)


def disc_mask(width, height, cx, cy, radius):
    yy, xx = np.mgrid[0:height, 0:width]
    return BinaryMask((xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= radius ** 2)


def make_instance(instance_id, phase, mask, confidence=None):
    return ParticleInstance.from_mask(instance_id, phase, mask, confidence=confidence)


@pytest.fixture
def two_particle_labels():
    """40x30 map: a 10x8 alite rectangle and a belite disc of radius 5."""
    codes = np.zeros((30, 40), dtype=np.uint8)
    codes[4:12, 3:13] = PhaseLabel.ALITE
    codes[disc_mask(40, 30, 28.0, 18.0, 5.0).bits] = PhaseLabel.BELITE
    return LabelMap(codes)


@pytest.fixture
def annotated_pair():
    """One image holding an alite square and a belite rectangle."""
    alite = make_instance(1, PhaseLabel.ALITE, rectangle_mask(20, 20, 2, 2, 5, 5))
    belite = make_instance(2, PhaseLabel.BELITE, rectangle_mask(20, 20, 10, 12, 6, 4))
    return AnnotatedImage(image_id=1, source_path="pair.png", width=20, height=20, instances=(alite, belite))
