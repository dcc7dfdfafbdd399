import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from clinker.annotations.annotation_instance_types import ParticleInstance
from clinker.annotations.annotation_mask_polygon_rle_utils import connected_components
from clinker.clinker_job_errors import ParameterError
from clinker.particles.particle_size_distribution_point_count import normalize_sizes, size_values
from clinker.raster.raster_pixel_grid_types import PARTICLE_PHASES, BinaryMask, PhaseLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParticleStats:
    particle_id: int
    phase: PhaseLabel
    centroid_x: float
    centroid_y: float
    area_px: int
    diag_px: float
    normalized_size: Optional[float] = None


def extract_instances(labels, min_area=1):
    """
    Splits every particle phase of a label map into 8-connected particles.

    Ids run from 1 in raster order of each particle's first pixel, over both
    phases together. Particles smaller than ``min_area`` pixels are dropped.
    """
    if min_area < 1:
        raise ParameterError(f"min_area must be at least 1, got {min_area}")
    found = []
    for phase in PARTICLE_PHASES:
        labeled, count = connected_components(labels.labels == phase)
        if count == 0:
            continue
        flat = labeled.ravel()
        component_ids, first_pixels = np.unique(flat, return_index=True)
        areas = np.bincount(flat, minlength=count + 1)
        for component, first in zip(component_ids.tolist(), first_pixels.tolist()):
            if component == 0 or areas[component] < min_area:
                continue
            found.append((first, phase, component, labeled))
    found.sort(key=lambda item: item[0])

    instances = []
    for particle_id, (_, phase, component, labeled) in enumerate(found, start=1):
        instances.append(ParticleInstance.from_mask(particle_id, phase, BinaryMask(labeled == component)))
    logger.info(f"Extracted {len(instances)} particle(s) from a {labels.width}x{labels.height} label map")
    return instances


def particle_stats(inst):
    """Centroid as the mean pixel centre, pixel area and tight bounding-box diagonal."""
    ys, xs = np.nonzero(inst.region.bits)
    return ParticleStats(
        particle_id=inst.id,
        phase=inst.phase,
        centroid_x=float(xs.mean() + 0.5),
        centroid_y=float(ys.mean() + 0.5),
        area_px=int(xs.size),
        diag_px=math.hypot(inst.bbox.w, inst.bbox.h),
    )


def assign_normalized_sizes(stats, metric="area", mode="linear"):
    """Returns copies of ``stats`` with ``normalized_size`` filled from the chosen metric."""
    normalized = normalize_sizes(size_values(stats, metric), mode=mode)
    return [replace(s, normalized_size=float(v)) for s, v in zip(stats, normalized)]


def phase_summary(stats, width, height):
    """Particle count, total particle area and area fraction of the image per phase."""
    summary = {}
    for phase in PARTICLE_PHASES:
        areas = [s.area_px for s in stats if s.phase == phase]
        summary[phase.display_name] = {
            "particles": len(areas),
            "area_px": int(sum(areas)),
            "area_fraction": sum(areas) / (width * height),
        }
    return summary


def stats_frame(stats, pixel_size=None):
    """
    Table of particle statistics, one row per particle.

    :param pixel_size: Micrometres per pixel; adds physical area and diagonal columns.
    """
    frame = pd.DataFrame({
        "particle_id": [s.particle_id for s in stats],
        "phase": [s.phase.display_name for s in stats],
        "centroid_x": [s.centroid_x for s in stats],
        "centroid_y": [s.centroid_y for s in stats],
        "area_px": [s.area_px for s in stats],
        "diag_px": [s.diag_px for s in stats],
        "normalized_size": [s.normalized_size for s in stats],
    })
    if pixel_size is not None:
        frame["area_um2"] = frame["area_px"] * pixel_size ** 2
        frame["diag_um"] = frame["diag_px"] * pixel_size
    return frame
