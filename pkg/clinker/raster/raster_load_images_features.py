import io
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image, UnidentifiedImageError

from clinker.clinker_job_errors import DataError, ImageLoadError, ParameterError
from clinker.clinker_output_files_utils import write_bytes_atomic
from clinker.raster.raster_pixel_grid_types import PHASE_PALETTE, LabelMap, PhaseLabel, RasterImage

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("PNG", "JPEG")
GRAYSCALE_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _pil_to_array(pil, path):
    mode = pil.mode
    if mode in ("P", "PA"):
        pil = pil.convert("RGBA" if "transparency" in pil.info or mode == "PA" else "RGB")
        mode = pil.mode
    if mode == "1":
        pil = pil.convert("L")
        mode = "L"
    if mode in ("L", "RGB"):
        return np.asarray(pil, dtype=np.uint8)
    if mode == "LA":
        return np.asarray(pil, dtype=np.uint8)[:, :, 0]
    if mode == "RGBA":
        return np.asarray(pil, dtype=np.uint8)[:, :, :3]
    if mode.startswith("I"):
        # 16-bit grayscale: keep the high byte.
        wide = np.asarray(pil).astype(np.int64)
        return np.clip(wide // 256, 0, 255).astype(np.uint8)
    raise ImageLoadError(f"Unsupported pixel layout '{mode}' in {path}")


def load_image(path):
    """
    Loads a PNG or JPEG micrograph as a 1- or 3-channel 8-bit RasterImage.

    Alpha channels are dropped and 16-bit samples are divided by 256.
    """
    try:
        with Image.open(path) as pil:
            if pil.format not in SUPPORTED_FORMATS:
                raise ImageLoadError(f"Unsupported image format '{pil.format}' in {path}, expected PNG or JPEG")
            pil.load()
            data = _pil_to_array(pil, path)
    except ImageLoadError:
        raise
    except FileNotFoundError as e:
        raise ImageLoadError(f"Image file not found: {path}") from e
    except (OSError, UnidentifiedImageError, ValueError, SyntaxError) as e:
        raise ImageLoadError(f"Cannot read image {path}: {e}") from e
    image = RasterImage(data)
    logger.info(f"Loaded image {path} ({image.width}x{image.height}, {image.channels} channel(s))")
    return image


def _png_bytes(array):
    buffer = io.BytesIO()
    Image.fromarray(array).save(buffer, format="PNG")
    return buffer.getvalue()


def save_image_png(img, path):
    """Writes a RasterImage as a lossless PNG."""
    data = img.data[:, :, 0] if img.channels == 1 else img.data
    return write_bytes_atomic(path, _png_bytes(np.ascontiguousarray(data)))


def to_grayscale(img):
    """Luma conversion 0.299R + 0.587G + 0.114B, rounded half up. 1-channel images pass through."""
    if img.channels == 1:
        return img
    luma = img.data.astype(np.float64) @ GRAYSCALE_WEIGHTS
    return RasterImage(np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8))


def _check_window_side(p):
    if int(p) != p or p < 1 or p % 2 == 0:
        raise ParameterError(f"Neighbourhood side p must be a positive odd integer, got {p}")
    return int(p)


def neighborhood_features(img, x, y, p):
    """
    Feature vector of the p x p neighbourhood centred on pixel (x, y).

    Values are ordered channel-major, then row-major over the window. Neighbours
    outside the image take the value of the nearest edge pixel.

    :return: uint8 vector of length channels * p * p.
    """
    p = _check_window_side(p)
    if not (0 <= x < img.width and 0 <= y < img.height):
        raise ParameterError(f"Pixel ({x}, {y}) lies outside the {img.width}x{img.height} image")
    r = p // 2
    rows = np.clip(np.arange(y - r, y + r + 1), 0, img.height - 1)
    cols = np.clip(np.arange(x - r, x + r + 1), 0, img.width - 1)
    window = img.data[np.ix_(rows, cols)]
    return np.transpose(window, (2, 0, 1)).reshape(-1).copy()


def neighborhood_feature_matrix(img, p, ys=None, xs=None):
    """
    Vectorised neighborhood_features over many pixels.

    :param ys: Row coordinates of the pixels; with ``xs`` omitted too, every pixel in raster order.
    :return: uint8 matrix (number of pixels, channels * p * p).
    """
    p = _check_window_side(p)
    r = p // 2
    padded = np.pad(img.data, ((r, r), (r, r), (0, 0)), mode="edge")
    # (height, width, channels, p, p)
    windows = sliding_window_view(padded, (p, p), axis=(0, 1))
    width = img.channels * p * p
    if ys is None and xs is None:
        return windows.reshape(img.height * img.width, width).copy()
    ys = np.asarray(ys, dtype=np.intp)
    xs = np.asarray(xs, dtype=np.intp)
    if ys.size and (ys.min() < 0 or ys.max() >= img.height or xs.min() < 0 or xs.max() >= img.width):
        raise ParameterError("Feature coordinates must lie inside the image")
    return windows[ys, xs].reshape(ys.size, width)


def save_label_map_png(labels, path):
    """Writes a LabelMap as an RGB PNG using PHASE_PALETTE."""
    palette = np.zeros((len(PhaseLabel), 3), dtype=np.uint8)
    for phase, colour in PHASE_PALETTE.items():
        palette[phase] = colour
    return write_bytes_atomic(path, _png_bytes(palette[labels.labels]))


def load_label_map(path):
    """
    Reads a label-map PNG written by save_label_map_png, or a single-channel
    PNG holding the codes 0, 1 and 2 directly.
    """
    image = load_image(path)
    if image.channels == 1:
        codes = image.data[:, :, 0]
        if codes.max() > max(PhaseLabel):
            raise DataError(f"Label map {path} holds values above {int(max(PhaseLabel))}")
        return LabelMap(codes)
    colours = image.data.astype(np.int32)
    packed = (colours[:, :, 0] << 16) | (colours[:, :, 1] << 8) | colours[:, :, 2]
    labels = np.full(packed.shape, -1, dtype=np.int16)
    for phase, (r, g, b) in PHASE_PALETTE.items():
        labels[packed == ((r << 16) | (g << 8) | b)] = phase
    if (labels < 0).any():
        y, x = np.argwhere(labels < 0)[0]
        raise DataError(f"Label map {path} has a colour outside the phase palette at pixel ({x}, {y})")
    return LabelMap(labels.astype(np.uint8))
