import logging
import math

import numpy as np

from clinker.annotations.annotation_instance_types import SplitPlan, SplitSide
from clinker.clinker_job_errors import DataError, ParameterError
from clinker.raster.raster_pixel_grid_types import PARTICLE_PHASES

logger = logging.getLogger(__name__)


def plan_split(images, train_fraction=0.8, folds=4, seed=0):
    """
    Assigns whole images to train or test so the train side holds at least
    ``train_fraction`` of all particles and as little more as the greedy
    packing allows, then deals the train images into ``folds`` folds.

    Images are packed into the test side largest first while the test share
    stays within 1 - train_fraction. Equal particle counts are ordered by a
    seeded shuffle, and the input order of ``images`` never matters.

    :param images: AnnotatedImage list with unique image ids.
    :param train_fraction: Target particle share of the train side, in (0, 1).
    :param folds: Number of cross-validation folds over train images; 0 disables folds.
    :param seed: Seed of the tie-breaking shuffle.
    :return: SplitPlan
    """
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if folds < 0:
        raise ParameterError(f"folds must be non-negative, got {folds}")
    ordered = sorted(images, key=lambda image: image.image_id)
    ids = [image.image_id for image in ordered]
    if len(set(ids)) != len(ids):
        raise DataError("Image ids must be unique to plan a split")

    counts = [len(image.instances) for image in ordered]
    total = sum(counts)
    # smallest integer train count >= train_fraction * total
    test_cap = total - math.ceil(train_fraction * total - 1e-9)
    rng = np.random.default_rng(seed)
    tiebreak = rng.permutation(len(ordered))

    assignments = {}
    test_particles = 0
    for index in sorted(range(len(ordered)), key=lambda i: (-counts[i], tiebreak[i])):
        if counts[index] > 0 and test_particles + counts[index] <= test_cap:
            assignments[ids[index]] = SplitSide.TEST
            test_particles += counts[index]
        else:
            assignments[ids[index]] = SplitSide.TRAIN

    train_positions = [i for i in np.argsort(tiebreak, kind="stable") if assignments[ids[i]] == SplitSide.TRAIN]
    if len(train_positions) < max(folds, 1):
        raise DataError(f"Only {len(train_positions)} train image(s) for {folds} fold(s)")
    fold_of = {ids[i]: rank % folds for rank, i in enumerate(train_positions)} if folds else {}

    plan = SplitPlan(assignments=assignments, folds=fold_of, seed=seed)
    train_share = (total - test_particles) / total if total else 0.0
    logger.info(
        f"Planned split of {len(ordered)} image(s): {len(train_positions)} train, "
        f"{len(ordered) - len(train_positions)} test, train particle share {train_share:.3f}"
    )
    return plan


def subset_images(images, plan, side):
    members = set(plan.image_ids(side))
    return [image for image in sorted(images, key=lambda image: image.image_id) if image.image_id in members]


def split_manifest(plan, images, folds=None):
    """JSON-ready description of a SplitPlan with per-side particle totals."""
    by_id = {image.image_id: image for image in images}
    entries = []
    totals = {side.value: {phase.display_name: 0 for phase in PARTICLE_PHASES} for side in SplitSide}
    for image_id in sorted(plan.assignments):
        side = plan.assignments[image_id]
        counts = by_id[image_id].particle_counts()
        for phase, count in counts.items():
            totals[side.value][phase.display_name] += count
        entries.append({
            "image_id": image_id,
            "file_name": by_id[image_id].source_path,
            "split": side.value,
            "fold": plan.folds.get(image_id),
            "particles": {phase.display_name: count for phase, count in counts.items()},
        })
    grand_total = sum(sum(side.values()) for side in totals.values())
    train_total = sum(totals[SplitSide.TRAIN.value].values())
    return {
        "seed": plan.seed,
        "folds": folds if folds is not None else len(set(plan.folds.values())),
        "train_particle_share": train_total / grand_total if grand_total else 0.0,
        "totals": totals,
        "images": entries,
    }
