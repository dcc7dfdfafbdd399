"""
Pixel-grid value types shared by every clinker module.

Arrays are stored in (row, column) order, i.e. ``array[y, x]``, and are made
read-only on construction so instances can be shared between threads.
"""
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from clinker.clinker_job_errors import ParameterError


def _frozen_array(values, dtype):
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


class PhaseLabel(IntEnum):
    """Per-pixel phase classes. OTHER is the interstitial matrix."""

    OTHER = 0
    ALITE = 1
    BELITE = 2

    @property
    def display_name(self):
        return self.name.lower()

    @classmethod
    def from_name(cls, name):
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            raise ParameterError(f"Unknown phase name '{name}'") from None


PARTICLE_PHASES = (PhaseLabel.ALITE, PhaseLabel.BELITE)

# RGB colours of label-map PNGs.
PHASE_PALETTE = {
    PhaseLabel.OTHER: (0, 0, 0),
    PhaseLabel.ALITE: (255, 0, 0),
    PhaseLabel.BELITE: (0, 0, 255),
}


@dataclass(frozen=True, eq=False)
class RasterImage:
    """An 8-bit image with 1 or 3 channels, ``data`` shaped (height, width, channels)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ParameterError(f"RasterImage needs (height, width, 1|3) data, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ParameterError("RasterImage must be at least 1x1")
        if data.dtype != np.uint8:
            if data.size and (data.min() < 0 or data.max() > 255):
                raise ParameterError("RasterImage values must lie in [0, 255]")
        object.__setattr__(self, "data", _frozen_array(data, np.uint8))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel PhaseLabel values, ``labels`` shaped (height, width)."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise ParameterError(f"LabelMap needs a non-empty 2-d array, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() > max(PhaseLabel)):
            raise ParameterError("LabelMap values must be PhaseLabel codes 0, 1 or 2")
        object.__setattr__(self, "labels", _frozen_array(labels, np.uint8))

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def phase_mask(self, phase):
        return BinaryMask(self.labels == int(phase))

    def phase_fractions(self):
        """Exact pixel fraction of every phase."""
        counts = np.bincount(self.labels.ravel(), minlength=len(PhaseLabel))
        return {phase: counts[phase] / self.labels.size for phase in PhaseLabel}

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.labels.shape == other.labels.shape and bool(np.array_equal(self.labels, other.labels))


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean pixel mask, ``bits`` shaped (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ParameterError(f"BinaryMask needs a non-empty 2-d array, got shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen_array(bits, bool))

    @classmethod
    def empty(cls, width, height):
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    def count(self):
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))


@dataclass(frozen=True)
class BBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ParameterError(f"BBox extent must be at least 1x1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ParameterError(f"BBox origin must be non-negative, got ({self.x}, {self.y})")

    @property
    def diagonal(self):
        return math.hypot(self.w, self.h)

    def to_coco(self):
        return [self.x, self.y, self.w, self.h]

    def slices(self):
        """Row and column slices selecting the box from a (height, width) array."""
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def overlaps(self, other):
        return (self.x < other.x + other.w and other.x < self.x + self.w
                and self.y < other.y + other.h and other.y < self.y + self.h)

    def union(self, other):
        x0, y0 = min(self.x, other.x), min(self.y, other.y)
        x1 = max(self.x + self.w, other.x + other.w)
        y1 = max(self.y + self.h, other.y + other.h)
        return BBox(x0, y0, x1 - x0, y1 - y0)
