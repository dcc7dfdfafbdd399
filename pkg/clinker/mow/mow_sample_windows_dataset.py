import logging
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from clinker.clinker_job_errors import DataError, ParameterError, WindowSamplingError
from clinker.clinker_output_files_utils import write_text_atomic
from clinker.raster.raster_load_images_features import neighborhood_feature_matrix
from clinker.raster.raster_pixel_grid_types import PhaseLabel

logger = logging.getLogger(__name__)

MAX_WINDOW_DRAWS = 1000
DEFAULT_SPLIT_RATIOS = (0.70, 0.15, 0.15)


class SampleSplit(IntEnum):
    UNASSIGNED = -1
    TRAIN = 0
    VAL = 1
    TEST = 2


@dataclass(frozen=True)
class WindowSpec:
    x: int
    y: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"Window side must be at least 1, got {self.n}")

    def fits(self, width, height):
        return self.x >= 0 and self.y >= 0 and self.x + self.n <= width and self.y + self.n <= height


@dataclass(frozen=True)
class StratifiedWindows:
    """Random windows redrawn until the three phases all appear in the covered pixels."""

    count: int = 10
    side: int = 50
    seed: int = 0


@dataclass(frozen=True)
class MowConfig:
    p: int = 3
    windows: Optional[Tuple[WindowSpec, ...]] = None
    sampling: Optional[StratifiedWindows] = None
    ratios: Tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
    seed: int = 0
    split_by_window: bool = False

    def __post_init__(self):
        if self.p < 1 or self.p % 2 == 0:
            raise ParameterError(f"Neighbourhood side p must be a positive odd integer, got {self.p}")
        if (self.windows is None) == (self.sampling is None):
            raise ParameterError("Give either explicit windows or a stratified sampling strategy")
        if self.windows is not None:
            object.__setattr__(self, "windows", tuple(self.windows))
        validate_ratios(self.ratios)


def validate_ratios(ratios):
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ParameterError(f"Split ratios must be three positive values summing to 1, got {tuple(ratios)}")


@dataclass(frozen=True, eq=False)
class MowDataset:
    """Neighbourhood-feature samples, one row per window pixel, with provenance."""

    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    image_ids: np.ndarray
    window_ids: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    channels: int
    p: int

    def __len__(self):
        return self.labels.shape[0]

    @property
    def feature_width(self):
        return self.features.shape[1]

    def rows(self, split):
        return np.flatnonzero(self.split == int(split))

    def split_sizes(self):
        return {part.name.lower(): int(np.count_nonzero(self.split == part))
                for part in (SampleSplit.TRAIN, SampleSplit.VAL, SampleSplit.TEST)}


def _check_dimensions(img, labels):
    if img.width != labels.width or img.height != labels.height:
        raise DataError(f"Label map is {labels.width}x{labels.height} but the image is {img.width}x{img.height}")


def _check_windows(windows, width, height):
    for index, window in enumerate(windows):
        if not window.fits(width, height):
            raise DataError(f"Window {index} {window} does not fit in the {width}x{height} image")


def sample_windows(img, labels, cfg):
    """
    Windows from which MoW samples are drawn.

    Explicit windows come back unchanged after a bounds check. Stratified
    sampling draws the whole set of windows again until every phase is covered,
    up to MAX_WINDOW_DRAWS draws.
    """
    _check_dimensions(img, labels)
    if cfg.windows is not None:
        _check_windows(cfg.windows, img.width, img.height)
        return list(cfg.windows)

    strategy = cfg.sampling
    if strategy.side > min(img.width, img.height):
        raise DataError(f"Window side {strategy.side} exceeds the {img.width}x{img.height} image")
    rng = np.random.default_rng(strategy.seed)
    wanted = set(int(phase) for phase in PhaseLabel)
    for draw in range(1, MAX_WINDOW_DRAWS + 1):
        xs = rng.integers(0, img.width - strategy.side + 1, size=strategy.count)
        ys = rng.integers(0, img.height - strategy.side + 1, size=strategy.count)
        present = set()
        for x, y in zip(xs, ys):
            present.update(np.unique(labels.labels[y:y + strategy.side, x:x + strategy.side]).tolist())
        if present >= wanted:
            logger.info(f"Successfully drew {strategy.count} stratified window(s) after {draw} attempt(s)")
            return [WindowSpec(int(x), int(y), strategy.side) for x, y in zip(xs, ys)]
    raise WindowSamplingError(
        f"No set of {strategy.count} window(s) of side {strategy.side} covered all phases after "
        f"{MAX_WINDOW_DRAWS} draws; the label map is degenerate"
    )


def build_dataset(img, labels, windows, p, image_id=0):
    """
    One sample per pixel per window, duplicates kept when windows overlap.

    :return: MowDataset with every split tag UNASSIGNED.
    """
    _check_dimensions(img, labels)
    _check_windows(windows, img.width, img.height)
    ys_parts, xs_parts, window_parts = [], [], []
    for index, window in enumerate(windows):
        yy, xx = np.mgrid[window.y:window.y + window.n, window.x:window.x + window.n]
        ys_parts.append(yy.ravel())
        xs_parts.append(xx.ravel())
        window_parts.append(np.full(window.n * window.n, index, dtype=np.int32))
    if ys_parts:
        ys, xs = np.concatenate(ys_parts), np.concatenate(xs_parts)
        window_ids = np.concatenate(window_parts)
    else:
        ys = xs = np.zeros(0, dtype=np.intp)
        window_ids = np.zeros(0, dtype=np.int32)
    features = neighborhood_feature_matrix(img, p, ys, xs)
    dataset = MowDataset(
        features=features,
        labels=labels.labels[ys, xs].astype(np.uint8),
        split=np.full(ys.size, SampleSplit.UNASSIGNED, dtype=np.int8),
        image_ids=np.full(ys.size, image_id, dtype=np.int32),
        window_ids=window_ids,
        xs=xs.astype(np.int32),
        ys=ys.astype(np.int32),
        channels=img.channels,
        p=p,
    )
    logger.info(f"Built MoW dataset: {len(dataset)} samples x {dataset.feature_width} features "
                f"from {len(windows)} window(s)")
    return dataset


def _round_half_up(value):
    return int(math.floor(value + 0.5 + 1e-9))


def _cut_points(count, ratios):
    return _round_half_up(ratios[0] * count), _round_half_up((ratios[0] + ratios[1]) * count)


def split_samples(ds, ratios=DEFAULT_SPLIT_RATIOS, seed=0, by_window=False):
    """
    Seeded train/val/test tags: shuffle, then cut at round(r0 * N) and round((r0 + r1) * N).

    With ``by_window`` the shuffle and the cuts run over windows and every sample
    inherits its window's tag.
    """
    validate_ratios(ratios)
    if len(ds) < 3:
        raise DataError(f"At least 3 samples are needed for a three-way split, got {len(ds)}")
    rng = np.random.default_rng(seed)
    split = np.empty(len(ds), dtype=np.int8)
    if by_window:
        window_ids = np.unique(ds.window_ids)
        order = window_ids[rng.permutation(window_ids.size)]
        first, second = _cut_points(order.size, ratios)
        tag_of_window = {}
        for rank, window in enumerate(order.tolist()):
            tag_of_window[window] = SampleSplit.TRAIN if rank < first else SampleSplit.VAL if rank < second else SampleSplit.TEST
        for window, tag in tag_of_window.items():
            split[ds.window_ids == window] = tag
    else:
        order = rng.permutation(len(ds))
        first, second = _cut_points(len(ds), ratios)
        split[order[:first]] = SampleSplit.TRAIN
        split[order[first:second]] = SampleSplit.VAL
        split[order[second:]] = SampleSplit.TEST
    result = replace(ds, split=split)
    logger.info(f"Split {len(ds)} samples into {result.split_sizes()}")
    return result


def dataset_frame(ds):
    """Audit table of a MowDataset: provenance columns followed by the features."""
    frame = pd.DataFrame({
        "image_id": ds.image_ids,
        "window": ds.window_ids,
        "x": ds.xs,
        "y": ds.ys,
        "split": [SampleSplit(int(tag)).name.lower() for tag in ds.split],
        "label": [PhaseLabel(int(label)).display_name for label in ds.labels],
    })
    features = pd.DataFrame(ds.features, columns=[f"f{i}" for i in range(ds.feature_width)])
    return pd.concat([frame, features], axis=1)


def write_dataset_csv(ds, path):
    return write_text_atomic(path, dataset_frame(ds).to_csv(index=False, lineterminator="\n"))
