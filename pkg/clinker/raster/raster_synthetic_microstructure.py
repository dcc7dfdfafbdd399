"""
Seeded procedural clinker micrographs with exact phase labels.

Alite is drawn as bright angular convex polygons, belite as rounded blue
discs with striations, on a textured dark matrix with additive Gaussian noise.
"""
import logging

import numpy as np

from clinker.raster.raster_pixel_grid_types import LabelMap, PhaseLabel, RasterImage

logger = logging.getLogger(__name__)

MATRIX_RGB = (96.0, 84.0, 74.0)
ALITE_RGB = (206.0, 162.0, 98.0)
BELITE_RGB = (78.0, 118.0, 204.0)


def _convex_polygon_mask(xx, yy, cx, cy, radius, sides, rotation):
    angles = rotation + 2.0 * np.pi * np.arange(sides) / sides
    vx = cx + radius * np.cos(angles)
    vy = cy + radius * np.sin(angles)
    inside = np.ones(xx.shape, dtype=bool)
    for i in range(sides):
        x0, y0 = vx[i], vy[i]
        x1, y1 = vx[(i + 1) % sides], vy[(i + 1) % sides]
        # vertices run counter-clockwise around the centre, interior on the left
        inside &= (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0) >= 0
    return inside


def generate_synthetic_microstructure(width=300, height=300, seed=0, noise_sigma=8.0,
                                      alite_count=7, belite_count=9):
    """
    Builds a synthetic 3-channel microstructure and its label map.

    :param width: Image width in pixels.
    :param height: Image height in pixels.
    :param seed: Seed of every random draw.
    :param noise_sigma: Standard deviation of the additive noise in intensity levels.
    :param alite_count: Number of angular bright crystals.
    :param belite_count: Number of rounded striated crystals.
    :return: (RasterImage, LabelMap)
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    labels = np.full((height, width), PhaseLabel.OTHER, dtype=np.uint8)
    scale = min(width, height)

    for _ in range(belite_count):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        rx = rng.uniform(0.035, 0.06) * scale
        ry = rx * rng.uniform(0.75, 1.0)
        theta = rng.uniform(0, np.pi)
        dx, dy = xx - cx, yy - cy
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        labels[(u / rx) ** 2 + (v / ry) ** 2 <= 1.0] = PhaseLabel.BELITE

    for _ in range(alite_count):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        radius = rng.uniform(0.06, 0.1) * scale
        sides = int(rng.integers(4, 7))
        polygon = _convex_polygon_mask(xx, yy, cx, cy, radius, sides, rng.uniform(0, 2 * np.pi))
        labels[polygon] = PhaseLabel.ALITE

    rgb = np.empty((height, width, 3), dtype=np.float64)
    palette = {PhaseLabel.OTHER: MATRIX_RGB, PhaseLabel.ALITE: ALITE_RGB, PhaseLabel.BELITE: BELITE_RGB}
    for phase, colour in palette.items():
        rgb[labels == phase] = colour

    texture = 9.0 * np.sin(xx / 7.0 + 1.3 * np.sin(yy / 11.0)) * np.cos(yy / 9.0)
    rgb[labels == PhaseLabel.OTHER] += texture[labels == PhaseLabel.OTHER, np.newaxis]
    striation = 10.0 * np.sin((xx + 0.6 * yy) / 2.5)
    rgb[labels == PhaseLabel.BELITE] += striation[labels == PhaseLabel.BELITE, np.newaxis]
    rgb += rng.normal(0.0, noise_sigma, size=rgb.shape)

    image = RasterImage(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))
    label_map = LabelMap(labels)
    fractions = label_map.phase_fractions()
    logger.info(
        f"Generated synthetic microstructure {width}x{height} (seed {seed}): "
        f"alite {fractions[PhaseLabel.ALITE]:.3f}, belite {fractions[PhaseLabel.BELITE]:.3f}"
    )
    return image, label_map
