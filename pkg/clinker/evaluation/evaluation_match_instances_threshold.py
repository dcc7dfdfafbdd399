import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.evaluation.evaluation_precision_recall_metrics import ZERO_SCORES, PrfScores, average_scores, prf_from_counts
from clinker.raster.raster_pixel_grid_types import PARTICLE_PHASES

logger = logging.getLogger(__name__)

MACRO = "macro"


@dataclass(frozen=True)
class MatchResult:
    pairs: Tuple[Tuple[int, int, float], ...]
    unmatched_preds: Tuple[int, ...]
    unmatched_gts: Tuple[int, ...]

    @property
    def matched_count(self):
        return len(self.pairs)


@dataclass(frozen=True)
class DetectionSet:
    """Scored particle detections per image id."""

    images: Dict[int, Tuple] = field(default_factory=dict)

    def __post_init__(self):
        for image_id, instances in self.images.items():
            for instance in instances:
                if instance.confidence is None:
                    raise DataError(f"Detection {instance.id} of image {image_id} has no confidence")

    @classmethod
    def from_images(cls, images):
        return cls({image.image_id: tuple(image.instances) for image in images})

    def count(self):
        return sum(len(instances) for instances in self.images.values())


@dataclass(frozen=True)
class ThresholdSweep:
    threshold: float
    scores: Dict[object, PrfScores]
    curve: Tuple[Tuple[float, float], ...]


def iou_matrix(preds, gts, phase_agnostic=False):
    """Pairwise mask IoU; pairs of different phases get -1 unless ``phase_agnostic``."""
    matrix = np.full((len(preds), len(gts)), -1.0)
    for i, pred in enumerate(preds):
        for j, gt in enumerate(gts):
            if not phase_agnostic and pred.phase != gt.phase:
                continue
            if not pred.bbox.overlaps(gt.bbox):
                matrix[i, j] = 0.0
                continue
            rows, cols = pred.bbox.union(gt.bbox).slices()
            a, b = pred.region.bits[rows, cols], gt.region.bits[rows, cols]
            union = np.count_nonzero(a | b)
            matrix[i, j] = np.count_nonzero(a & b) / union if union else 0.0
    return matrix


def _greedy_match(preds, gts, ious, iou_threshold):
    best_iou = ious.max(axis=1) if ious.shape[1] else np.zeros(len(preds))
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, -best_iou[i], preds[i].id))
    gt_order = sorted(range(len(gts)), key=lambda j: gts[j].id)
    taken = set()
    pairs = []
    matched_preds = set()
    for i in order:
        chosen = None
        for j in gt_order:
            if j in taken or ious[i, j] < iou_threshold:
                continue
            if chosen is None or ious[i, j] > ious[i, chosen]:
                chosen = j
        if chosen is not None:
            taken.add(chosen)
            matched_preds.add(i)
            pairs.append((preds[i].id, gts[chosen].id, float(ious[i, chosen])))
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_preds=tuple(sorted(preds[i].id for i in range(len(preds)) if i not in matched_preds)),
        unmatched_gts=tuple(sorted(gts[j].id for j in range(len(gts)) if j not in taken)),
    )


def _check_threshold(iou_threshold):
    if not 0.0 < iou_threshold <= 1.0:
        raise ParameterError(f"IoU threshold must lie in (0, 1], got {iou_threshold}")


def match_instances(preds, gts, iou_threshold=0.5, phase_agnostic=False):
    """
    Greedy one-to-one matching of predicted to ground-truth particles.

    Predictions are taken by descending confidence (missing confidence counts as
    1.0), then descending best IoU, then ascending id. Each takes the unmatched
    ground truth of its phase with the highest IoU of at least ``iou_threshold``,
    the lower ground-truth id winning ties.
    """
    _check_threshold(iou_threshold)
    preds, gts = list(preds), list(gts)
    return _greedy_match(preds, gts, iou_matrix(preds, gts, phase_agnostic), iou_threshold)


def instance_counts(match, preds, gts, phase):
    """TP, FP and FN of ``phase``; a true positive is counted under its ground-truth phase."""
    gt_phase = {gt.id: gt.phase for gt in gts}
    pred_phase = {pred.id: pred.phase for pred in preds}
    tp = sum(1 for _, gt_id, _ in match.pairs if gt_phase[gt_id] == phase)
    fp = sum(1 for pred_id in match.unmatched_preds if pred_phase[pred_id] == phase)
    fn = sum(1 for gt_id in match.unmatched_gts if gt_phase[gt_id] == phase)
    return tp, fp, fn


def scored_phases(dets, gts):
    """Phases present on either side, or both particle phases when nothing is present."""
    present = {instance.phase for instances in list(dets.values()) + list(gts.values()) for instance in instances}
    return tuple(phase for phase in PARTICLE_PHASES if phase in present) or PARTICLE_PHASES


class _PreparedImage:
    def __init__(self, preds, gts, phase_agnostic):
        self.preds = list(preds)
        self.gts = list(gts)
        self.ious = iou_matrix(self.preds, self.gts, phase_agnostic)
        self.confidences = np.array([pred.score for pred in self.preds])

    def counts_at(self, cutoff, iou_threshold, phases):
        kept = np.flatnonzero(self.confidences >= cutoff) if self.preds else np.zeros(0, dtype=int)
        preds = [self.preds[i] for i in kept]
        match = _greedy_match(preds, self.gts, self.ious[kept], iou_threshold)
        return {phase: instance_counts(match, preds, self.gts, phase) for phase in phases}


def _prepare(dets, gts, phase_agnostic):
    image_ids = sorted(set(dets) | set(gts))
    return [_PreparedImage(dets.get(i, ()), gts.get(i, ()), phase_agnostic) for i in image_ids]


def _scores_at(prepared, cutoff, iou_threshold, phases, average):
    totals = {phase: [0, 0, 0] for phase in phases}
    for image in prepared:
        for phase, counts in image.counts_at(cutoff, iou_threshold, phases).items():
            for k in range(3):
                totals[phase][k] += counts[k]
    scores = {phase: prf_from_counts(*totals[phase]) for phase in phases}
    scores[MACRO] = average_scores([scores[phase] for phase in phases], average)
    return scores


def _as_mapping(detections):
    if isinstance(detections, DetectionSet):
        return detections.images
    return {image_id: tuple(instances) for image_id, instances in dict(detections).items()}


def evaluate_instances(dets, gts, iou_threshold=0.5, cutoff=0.0, phases=None, average="macro",
                       phase_agnostic=False):
    """
    Instance-level PRF per phase at one confidence cutoff.

    :param dets: DetectionSet or mapping image id -> predicted instances.
    :param gts: Mapping image id -> ground-truth instances.
    :return: dict phase -> PrfScores plus the averaged entry under "macro".
    """
    _check_threshold(iou_threshold)
    dets, gts = _as_mapping(dets), _as_mapping(gts)
    phases = tuple(phases) if phases else scored_phases(dets, gts)
    return _scores_at(_prepare(dets, gts, phase_agnostic), cutoff, iou_threshold, phases, average)


def sweep_cutoffs(step=0.01):
    if not 0.0 < step <= 1.0:
        raise ParameterError(f"Sweep step must lie in (0, 1], got {step}")
    count = int(round(1.0 / step))
    return [round(i * step, 10) for i in range(count + 1) if round(i * step, 10) <= 1.0]


def best_f1_threshold(dets, gts, iou_threshold=0.5, step=0.01, average="macro", workers=1, phase_agnostic=False):
    """
    Sweeps confidence cutoffs 0, step, ..., 1 and returns the cutoff with the
    best averaged F1, the lowest cutoff winning ties.

    :return: ThresholdSweep with the chosen cutoff, its per-phase scores and
        the (cutoff, F1) curve.
    """
    _check_threshold(iou_threshold)
    dets, gts = _as_mapping(dets), _as_mapping(gts)
    for image_id, instances in dets.items():
        if any(instance.confidence is None for instance in instances):
            raise DataError(f"Detections of image {image_id} lack confidence scores")
    phases = scored_phases(dets, gts)
    if not any(dets.values()):
        logger.warning("Empty detection set, reporting threshold 0 with zero scores")
        scores = {phase: _empty_scores(gts, phase) for phase in phases}
        scores[MACRO] = average_scores([scores[phase] for phase in phases], average)
        return ThresholdSweep(threshold=0.0, scores=scores, curve=((0.0, 0.0),))

    prepared = _prepare(dets, gts, phase_agnostic)
    cutoffs = sweep_cutoffs(step)
    logger.info(f"Starting to sweep {len(cutoffs)} confidence cutoff(s) over {len(prepared)} image(s)")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(lambda c: _scores_at(prepared, c, iou_threshold, phases, average), cutoffs))

    best = 0
    for index, scores in enumerate(results):
        if scores[MACRO].f1 > results[best][MACRO].f1:
            best = index
    curve = tuple((cutoff, scores[MACRO].f1) for cutoff, scores in zip(cutoffs, results))
    logger.info(f"Successfully found best cutoff {cutoffs[best]} with F1 {results[best][MACRO].f1:.4f}")
    return ThresholdSweep(threshold=cutoffs[best], scores=results[best], curve=curve)


def _empty_scores(gts, phase):
    fn = sum(1 for instances in gts.values() for instance in instances if instance.phase == phase)
    return prf_from_counts(0, 0, fn) if fn else ZERO_SCORES
