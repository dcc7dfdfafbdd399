import math

import numpy as np
import pytest

from clinker.clinker_job_errors import ParameterError
from clinker.raster.raster_pixel_grid_types import BBox, BinaryMask, LabelMap, PhaseLabel, RasterImage


def test_raster_image_accepts_single_channel_2d_data():
    image = RasterImage(np.zeros((4, 5), dtype=np.uint8))
    assert (image.height, image.width, image.channels) == (4, 5, 1)


def test_raster_image_is_read_only():
    image = RasterImage(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        image.data[0, 0, 0] = 1


@pytest.mark.parametrize("shape", [(3, 3, 2), (0, 4, 3), (3,)])
def test_raster_image_rejects_bad_shapes(shape):
    with pytest.raises(ParameterError):
        RasterImage(np.zeros(shape, dtype=np.uint8))


def test_raster_image_rejects_out_of_range_values():
    with pytest.raises(ParameterError):
        RasterImage(np.full((2, 2), 300, dtype=np.int32))


def test_label_map_rejects_unknown_codes():
    with pytest.raises(ParameterError):
        LabelMap(np.array([[0, 3]]))


def test_label_map_phase_fractions_are_exact():
    labels = LabelMap(np.array([[0, 1, 1, 2], [0, 0, 1, 2]]))
    fractions = labels.phase_fractions()
    assert fractions[PhaseLabel.OTHER] == 3 / 8
    assert fractions[PhaseLabel.ALITE] == 3 / 8
    assert fractions[PhaseLabel.BELITE] == 2 / 8
    assert labels.phase_mask(PhaseLabel.BELITE).count() == 2


def test_label_maps_compare_by_content():
    assert LabelMap(np.array([[1, 2]])) == LabelMap(np.array([[1, 2]], dtype=np.int64))
    assert LabelMap(np.array([[1, 2]])) != LabelMap(np.array([[2, 1]]))


def test_binary_mask_empty_and_count():
    mask = BinaryMask.empty(7, 3)
    assert mask.bits.shape == (3, 7)
    assert mask.count() == 0


def test_phase_label_names():
    assert PhaseLabel.from_name(" Alite ") is PhaseLabel.ALITE
    assert PhaseLabel.BELITE.display_name == "belite"
    with pytest.raises(ParameterError):
        PhaseLabel.from_name("ferrite")


def test_bbox_geometry():
    a = BBox(1, 2, 3, 4)
    b = BBox(3, 5, 4, 2)
    assert a.diagonal == pytest.approx(5.0)
    assert a.to_coco() == [1, 2, 3, 4]
    assert a.overlaps(b)
    assert not a.overlaps(BBox(4, 2, 1, 1))
    assert a.union(b) == BBox(1, 2, 6, 5)
    rows, cols = a.slices()
    assert np.ones((10, 10))[rows, cols].shape == (4, 3)
    assert math.isclose(BBox(0, 0, 1, 1).diagonal, math.sqrt(2))


def test_bbox_rejects_empty_extent():
    with pytest.raises(ParameterError):
        BBox(0, 0, 0, 2)
