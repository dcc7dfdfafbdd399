import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.clinker_output_files_utils import svg_figure, write_svg_atomic
from clinker.raster.raster_pixel_grid_types import PHASE_PALETTE, PhaseLabel

logger = logging.getLogger(__name__)

SIZE_RANGE = (0.1, 16.0)
SIZE_METRICS = ("area", "diagonal")


@dataclass(frozen=True)
class PsdCurve:
    points: Tuple[Tuple[float, float], ...]
    metric: str

    @property
    def sizes(self):
        return [size for size, _ in self.points]

    @property
    def percents(self):
        return [percent for _, percent in self.points]


@dataclass(frozen=True)
class PointCountResult:
    total: int
    counts: Dict[PhaseLabel, int]
    fractions: Dict[PhaseLabel, float]

    def to_dict(self):
        return {
            "total_points": self.total,
            "counts": {phase.display_name: count for phase, count in self.counts.items()},
            "fractions": {phase.display_name: fraction for phase, fraction in self.fractions.items()},
        }


def size_values(stats, metric):
    if metric == "area":
        return [s.area_px for s in stats]
    if metric == "diagonal":
        return [s.diag_px for s in stats]
    raise ParameterError(f"Unknown size metric '{metric}', expected one of {SIZE_METRICS}")


def normalize_sizes(values, mode="linear"):
    """
    Maps positive sizes affinely onto [0.1, 16], the smallest to 0.1 and the largest to 16.

    With ``mode="log"`` the map is applied to the logarithms of the sizes.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise DataError(f"At least 2 sizes are needed to normalize, got {values.size}")
    if (values <= 0).any():
        raise DataError("Sizes must be positive")
    if mode == "log":
        values = np.log(values)
    elif mode != "linear":
        raise ParameterError(f"Unknown normalization '{mode}', expected 'linear' or 'log'")
    low, high = values.min(), values.max()
    if low == high:
        raise DataError("All sizes are equal, the normalization scale is undefined")
    lo, hi = SIZE_RANGE
    normalized = lo + (values - low) * (hi - lo) / (high - low)
    normalized[values == low] = lo
    normalized[values == high] = hi
    return normalized


def psd_curve(stats, metric="area", mode="linear"):
    """
    Cumulative percent of particles finer than or equal to each normalized size.

    Equal sizes collapse into one point carrying the higher percent.
    """
    if len(stats) < 2:
        raise DataError(f"A size distribution needs at least 2 particles, got {len(stats)}")
    sizes = np.sort(normalize_sizes(size_values(stats, metric), mode=mode))
    unique = np.unique(sizes)
    percents = 100.0 * np.searchsorted(sizes, unique, side="right") / sizes.size
    return PsdCurve(points=tuple(zip(unique.tolist(), percents.tolist())), metric=metric)


def psd_frame(curve):
    return pd.DataFrame({"normalized_size": curve.sizes, "percent_finer": curve.percents})


def _lattice(count, extent):
    return np.floor((np.arange(count) + 0.5) * extent / count).astype(np.intp)


def point_count(labels, n_points, mode="grid", seed=0):
    """
    Point-count estimate of phase fractions.

    Grid mode lays a cell-centred k x k lattice, k = ceil(sqrt(n_points)), and
    keeps its first ``n_points`` in raster order. Random mode draws pixels
    uniformly with ``seed``.
    """
    if n_points < 1:
        raise ParameterError(f"n_points must be at least 1, got {n_points}")
    if mode == "grid":
        k = math.isqrt(n_points)
        if k * k < n_points:
            k += 1
        rows, cols = np.meshgrid(_lattice(k, labels.height), _lattice(k, labels.width), indexing="ij")
        ys, xs = rows.ravel()[:n_points], cols.ravel()[:n_points]
    elif mode == "random":
        rng = np.random.default_rng(seed)
        xs = rng.integers(0, labels.width, size=n_points)
        ys = rng.integers(0, labels.height, size=n_points)
    else:
        raise ParameterError(f"Unknown point-count mode '{mode}', expected 'grid' or 'random'")
    hits = np.bincount(labels.labels[ys, xs], minlength=len(PhaseLabel))
    counts = {phase: int(hits[phase]) for phase in PhaseLabel}
    fractions = {phase: counts[phase] / n_points for phase in PhaseLabel}
    logger.info(f"Point count over {n_points} {mode} point(s): " +
                ", ".join(f"{phase.display_name} {fractions[phase]:.3f}" for phase in PhaseLabel))
    return PointCountResult(total=n_points, counts=counts, fractions=fractions)


def render_psd_svg(curves, path):
    """Percent finer against normalized size, one step curve per metric."""
    with svg_figure(figsize=(6, 4)) as (figure, axes):
        for curve in curves:
            axes.step(curve.sizes, curve.percents, where="post", marker="o", markersize=3,
                      label=f"particle {'size' if curve.metric == 'diagonal' else 'area'}")
        axes.set_xlabel("Normalized particle size")
        axes.set_ylabel("Percentage of particles finer (%)")
        axes.set_xlim(0, SIZE_RANGE[1] + 0.5)
        axes.set_ylim(0, 105)
        axes.grid(True, linewidth=0.3)
        axes.legend(loc="lower right")
        figure.tight_layout()
        return write_svg_atomic(path, figure)


def render_centroids_svg(labels, stats, path):
    """Label map with every particle centroid marked '*' and annotated with its id."""
    palette = np.zeros((len(PhaseLabel), 3), dtype=np.uint8)
    for phase, colour in PHASE_PALETTE.items():
        palette[phase] = colour
    with svg_figure(figsize=(6, 6 * labels.height / labels.width)) as (figure, axes):
        axes.imshow(palette[labels.labels], interpolation="nearest",
                    extent=(0, labels.width, labels.height, 0))
        for s in stats:
            axes.plot(s.centroid_x, s.centroid_y, marker="*", color="yellow", markersize=6)
            axes.annotate(str(s.particle_id), (s.centroid_x, s.centroid_y), xytext=(3, 3),
                          textcoords="offset points", color="white", fontsize=6)
        axes.set_axis_off()
        figure.tight_layout()
        return write_svg_atomic(path, figure)
