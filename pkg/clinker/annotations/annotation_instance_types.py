from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from clinker.clinker_job_errors import AnnotationError, ParameterError
from clinker.raster.raster_pixel_grid_types import BBox, BinaryMask, PhaseLabel


@dataclass(frozen=True)
class Polygon:
    """Closed polygon in pixel-corner coordinates; x grows right, y grows down."""

    vertices: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        vertices = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(vertices) < 3:
            raise AnnotationError(f"A polygon needs at least 3 vertices, got {len(vertices)}")
        object.__setattr__(self, "vertices", vertices)

    @classmethod
    def from_flat(cls, coords):
        """Builds a polygon from a COCO style [x0, y0, x1, y1, ...] list."""
        if len(coords) % 2:
            raise AnnotationError("Flat polygon coordinate list has an odd length")
        return cls(tuple(zip(coords[0::2], coords[1::2])))

    def signed_area(self):
        """Shoelace area; traced outer boundaries are positive, holes negative."""
        xy = np.asarray(self.vertices)
        x, y = xy[:, 0], xy[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def is_hole(self):
        return self.signed_area() < 0

    def perimeter(self):
        xy = np.asarray(self.vertices)
        return float(np.hypot(*(np.roll(xy, -1, axis=0) - xy).T).sum())

    def flat(self):
        return [value for vertex in self.vertices for value in vertex]


@dataclass(frozen=True)
class RleCounts:
    """Column-major run lengths, alternating zero-runs and one-runs, zero-run first."""

    width: int
    height: int
    counts: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))


@dataclass(frozen=True)
class ParticleInstance:
    id: int
    phase: PhaseLabel
    region: BinaryMask
    polygons: Tuple[Polygon, ...]
    bbox: BBox
    confidence: Optional[float] = None

    def __post_init__(self):
        phase = PhaseLabel(self.phase)
        if phase == PhaseLabel.OTHER:
            raise AnnotationError(f"Particle {self.id} cannot carry the matrix phase")
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "polygons", tuple(self.polygons))
        if self.confidence is not None:
            confidence = float(self.confidence)
            if not 0.0 <= confidence <= 1.0:
                raise AnnotationError(f"Particle {self.id} confidence {confidence} lies outside [0, 1]")
            object.__setattr__(self, "confidence", confidence)

    @classmethod
    def from_mask(cls, id, phase, region, confidence=None, polygons=None):
        """
        Builds an instance from its mask, deriving the tight bounding box and,
        unless given, the traced boundary polygons.
        """
        from clinker.annotations.annotation_mask_polygon_rle_utils import mask_bbox, mask_to_polygons

        if not isinstance(region, BinaryMask):
            region = BinaryMask(region)
        if polygons is None:
            polygons = mask_to_polygons(region)
        return cls(id=id, phase=phase, region=region, polygons=tuple(polygons),
                   bbox=mask_bbox(region), confidence=confidence)

    @property
    def area(self):
        return self.region.count()

    @property
    def score(self):
        """Confidence used for ranking; ground truth and unscored detections count as 1.0."""
        return 1.0 if self.confidence is None else self.confidence


@dataclass(frozen=True)
class AnnotatedImage:
    image_id: int
    source_path: str
    width: int
    height: int
    instances: Tuple[ParticleInstance, ...] = ()

    def __post_init__(self):
        instances = tuple(self.instances)
        seen = set()
        for instance in instances:
            if instance.id in seen:
                raise AnnotationError(f"Duplicate instance id {instance.id} in image {self.image_id}")
            seen.add(instance.id)
            if instance.region.width != self.width or instance.region.height != self.height:
                raise AnnotationError(
                    f"Instance {instance.id} mask is {instance.region.width}x{instance.region.height}, "
                    f"image {self.image_id} is {self.width}x{self.height}"
                )
        object.__setattr__(self, "instances", instances)

    def particle_counts(self):
        counts = {phase: 0 for phase in (PhaseLabel.ALITE, PhaseLabel.BELITE)}
        for instance in self.instances:
            counts[instance.phase] += 1
        return counts


class SplitSide(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class SplitPlan:
    """Whole-image train/test assignment with cross-validation folds on the train side."""

    assignments: Dict[int, SplitSide]
    folds: Dict[int, int] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for image_id in self.folds:
            if self.assignments.get(image_id) != SplitSide.TRAIN:
                raise ParameterError(f"Fold index given for non-train image {image_id}")

    def image_ids(self, side):
        return sorted(image_id for image_id, assigned in self.assignments.items() if assigned == side)

    def fold_members(self, fold):
        return sorted(image_id for image_id, index in self.folds.items() if index == fold)
