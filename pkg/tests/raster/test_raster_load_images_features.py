import numpy as np
import pytest
from PIL import Image

from clinker.clinker_job_errors import DataError, ImageLoadError, ParameterError
from clinker.raster.raster_load_images_features import (
    load_image, load_label_map, neighborhood_feature_matrix, neighborhood_features, save_image_png,
    save_label_map_png, to_grayscale)
from clinker.raster.raster_pixel_grid_types import LabelMap, PhaseLabel, RasterImage
from clinker.raster.raster_synthetic_microstructure import generate_synthetic_microstructure


def test_png_round_trip_keeps_pixels(tmp_path):
    data = np.random.default_rng(1).integers(0, 256, size=(9, 11, 3), dtype=np.uint8)
    path = save_image_png(RasterImage(data), tmp_path / "image.png")
    loaded = load_image(path)
    assert loaded.channels == 3
    assert np.array_equal(loaded.data, data)


def test_rgba_alpha_is_dropped(tmp_path):
    rgba = np.zeros((3, 4, 4), dtype=np.uint8)
    rgba[..., 0] = 200
    rgba[..., 3] = 17
    Image.fromarray(rgba).save(tmp_path / "rgba.png")
    loaded = load_image(tmp_path / "rgba.png")
    assert loaded.channels == 3
    assert (loaded.data[..., 0] == 200).all()


def test_sixteen_bit_png_keeps_the_high_byte(tmp_path):
    wide = np.array([[0, 256, 65535]], dtype=np.uint16)
    Image.fromarray(wide).save(tmp_path / "wide.png")
    loaded = load_image(tmp_path / "wide.png")
    assert loaded.data[:, :, 0].tolist() == [[0, 1, 255]]


def test_unsupported_format_is_rejected(tmp_path):
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(tmp_path / "image.bmp", format="BMP")
    with pytest.raises(ImageLoadError, match="BMP"):
        load_image(tmp_path / "image.bmp")


def test_missing_and_corrupt_files_name_the_path(tmp_path):
    with pytest.raises(ImageLoadError, match="missing.png"):
        load_image(tmp_path / "missing.png")
    (tmp_path / "broken.png").write_bytes(b"not an image")
    with pytest.raises(ImageLoadError, match="broken.png"):
        load_image(tmp_path / "broken.png")


def test_grayscale_uses_rounded_luma():
    image = RasterImage(np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 10, 10]]], dtype=np.uint8))
    gray = to_grayscale(image)
    assert gray.channels == 1
    assert gray.data[0, :, 0].tolist() == [76, 150, 29, 10]
    assert to_grayscale(gray) is gray


def test_corner_neighbourhood_replicates_edges():
    image = RasterImage(np.arange(9, dtype=np.uint8).reshape(3, 3))
    assert neighborhood_features(image, 0, 0, 3).tolist() == [0, 0, 1, 0, 0, 1, 3, 3, 4]
    assert neighborhood_features(image, 1, 1, 1).tolist() == [4]


def test_features_are_channel_major():
    data = np.zeros((3, 3, 3), dtype=np.uint8)
    data[..., 1] = 1
    data[..., 2] = 2
    features = neighborhood_features(RasterImage(data), 1, 1, 3)
    assert features.tolist() == [0] * 9 + [1] * 9 + [2] * 9


@pytest.mark.parametrize("p", [1, 3, 5])
def test_feature_matrix_matches_single_pixel_features(p):
    image, _ = generate_synthetic_microstructure(width=17, height=13, seed=5)
    matrix = neighborhood_feature_matrix(image, p)
    assert matrix.shape == (17 * 13, 3 * p * p)
    for y, x in [(0, 0), (12, 16), (6, 3), (0, 16), (12, 0)]:
        assert np.array_equal(matrix[y * 17 + x], neighborhood_features(image, x, y, p))
    picked = neighborhood_feature_matrix(image, p, ys=[12, 0], xs=[16, 3])
    assert np.array_equal(picked, matrix[[12 * 17 + 16, 3]])


@pytest.mark.parametrize("p", [0, 2, 4, -1])
def test_even_or_non_positive_window_is_rejected(p):
    image = RasterImage(np.zeros((5, 5), dtype=np.uint8))
    with pytest.raises(ParameterError):
        neighborhood_features(image, 2, 2, p)


def test_pixel_outside_image_is_rejected():
    image = RasterImage(np.zeros((5, 5), dtype=np.uint8))
    with pytest.raises(ParameterError):
        neighborhood_features(image, 5, 0, 3)


def test_label_map_png_round_trip(tmp_path, two_particle_labels):
    path = save_label_map_png(two_particle_labels, tmp_path / "labels.png")
    assert load_label_map(path) == two_particle_labels
    with Image.open(path) as pil:
        assert pil.getpixel((3, 4)) == (255, 0, 0)


def test_single_channel_label_codes_are_accepted(tmp_path):
    Image.fromarray(np.array([[0, 1], [2, 1]], dtype=np.uint8)).save(tmp_path / "codes.png")
    assert load_label_map(tmp_path / "codes.png") == LabelMap(np.array([[0, 1], [2, 1]]))


def test_off_palette_colour_is_a_data_error(tmp_path):
    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[1, 0] = (0, 255, 0)
    Image.fromarray(rgb).save(tmp_path / "green.png")
    with pytest.raises(DataError, match=r"\(0, 1\)"):
        load_label_map(tmp_path / "green.png")


def test_synthetic_microstructure_is_seeded(synthetic_micrograph):
    image, labels = synthetic_micrograph
    again_image, again_labels = generate_synthetic_microstructure(width=300, height=300, seed=0)
    assert np.array_equal(image.data, again_image.data)
    assert labels == again_labels
    assert (image.width, image.height, image.channels) == (300, 300, 3)
    fractions = labels.phase_fractions()
    assert all(fractions[phase] > 0.005 for phase in PhaseLabel)
    other_image, _ = generate_synthetic_microstructure(width=300, height=300, seed=1)
    assert not np.array_equal(image.data, other_image.data)
