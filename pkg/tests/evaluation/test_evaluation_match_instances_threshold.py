import numpy as np
import pytest

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.evaluation.evaluation_match_instances_threshold import (
    MACRO, DetectionSet, best_f1_threshold, evaluate_instances, match_instances, sweep_cutoffs)
from clinker.raster.raster_pixel_grid_types import PhaseLabel

from conftest import make_instance, rectangle_mask

SIZE = 30


def rect(instance_id, phase, x, y, w, h, confidence=None):
    return make_instance(instance_id, phase, rectangle_mask(SIZE, SIZE, x, y, w, h), confidence)


def test_identical_sets_match_perfectly():
    gts = [rect(1, PhaseLabel.ALITE, 2, 2, 6, 6), rect(2, PhaseLabel.BELITE, 15, 15, 8, 5)]
    preds = [rect(10, PhaseLabel.ALITE, 2, 2, 6, 6, 0.9), rect(11, PhaseLabel.BELITE, 15, 15, 8, 5, 0.7)]
    match = match_instances(preds, gts)
    assert match.pairs == ((10, 1, 1.0), (11, 2, 1.0))
    assert match.unmatched_preds == () and match.unmatched_gts == ()
    scores = evaluate_instances({1: preds}, {1: gts})
    assert scores[MACRO].f1 == 1.0


def test_phase_mismatch_is_a_false_positive_and_a_miss():
    gts = [rect(1, PhaseLabel.ALITE, 2, 2, 6, 6)]
    preds = [rect(5, PhaseLabel.BELITE, 2, 2, 6, 6, 0.9)]
    assert match_instances(preds, gts).matched_count == 0
    assert match_instances(preds, gts, phase_agnostic=True).matched_count == 1
    scores = evaluate_instances({1: preds}, {1: gts})
    assert (scores[PhaseLabel.ALITE].fn, scores[PhaseLabel.BELITE].fp) == (1, 1)


def test_confident_prediction_takes_the_ground_truth_first():
    gts = [rect(1, PhaseLabel.ALITE, 0, 0, 10, 10)]
    weak = rect(7, PhaseLabel.ALITE, 0, 0, 10, 10, 0.4)
    strong = rect(8, PhaseLabel.ALITE, 0, 0, 10, 8, 0.9)
    match = match_instances([weak, strong], gts)
    assert match.pairs == ((8, 1, 0.8),)
    assert match.unmatched_preds == (7,)


def test_iou_threshold_is_inclusive():
    gts = [rect(1, PhaseLabel.ALITE, 0, 0, 10, 10)]
    half = [rect(2, PhaseLabel.ALITE, 0, 0, 10, 5, 1.0)]
    assert match_instances(half, gts, iou_threshold=0.5).matched_count == 1
    assert match_instances(half, gts, iou_threshold=0.51).matched_count == 0
    with pytest.raises(ParameterError):
        match_instances(half, gts, iou_threshold=0.0)


def test_sweep_drops_a_spurious_low_confidence_detection():
    gts = {1: [rect(1, PhaseLabel.ALITE, 2, 2, 6, 6)]}
    dets = DetectionSet({1: (rect(1, PhaseLabel.ALITE, 2, 2, 6, 6, 0.8),
                             rect(2, PhaseLabel.ALITE, 18, 18, 5, 5, 0.3))})
    sweep = best_f1_threshold(dets, gts)
    assert sweep.threshold == pytest.approx(0.31)
    assert sweep.scores[MACRO].f1 == 1.0
    assert len(sweep.curve) == 101
    assert dict(sweep.curve)[0.3] == pytest.approx(2 / 3)


@pytest.mark.parametrize("seed", range(20))
def test_sweep_agrees_with_single_cutoff_evaluation(seed):
    rng = np.random.default_rng(seed)
    gts, dets = {}, {}
    for image_id in range(3):
        gts[image_id] = []
        dets[image_id] = []
        for k in range(4):
            phase = PhaseLabel.ALITE if k % 2 else PhaseLabel.BELITE
            x, y = (k % 2) * 15 + 1, (k // 2) * 15 + 1
            gts[image_id].append(rect(k, phase, x, y, 10, 10))
            if rng.random() < 0.8:
                dx, dy = rng.integers(0, 5, size=2)
                guess = phase if rng.random() < 0.8 else PhaseLabel(3 - phase)
                dets[image_id].append(rect(k, guess, x + int(dx), y + int(dy), 10, 10, round(rng.random(), 2)))
    step = 0.01
    sweep = best_f1_threshold(dets, gts, step=step, workers=2)
    direct = [(c, evaluate_instances(dets, gts, cutoff=c)[MACRO].f1) for c in sweep_cutoffs(step)]
    best = max(f1 for _, f1 in direct)
    assert sweep.threshold == next(c for c, f1 in direct if f1 == best)
    assert [f1 for _, f1 in sweep.curve] == [f1 for _, f1 in direct]
    for phase in (PhaseLabel.ALITE, PhaseLabel.BELITE):
        scores = sweep.scores[phase]
        assert scores.tp + scores.fn == 6


def test_sweep_needs_confidences():
    gts = {1: [rect(1, PhaseLabel.ALITE, 2, 2, 6, 6)]}
    with pytest.raises(DataError):
        best_f1_threshold({1: [rect(1, PhaseLabel.ALITE, 2, 2, 6, 6)]}, gts)
    with pytest.raises(DataError):
        DetectionSet({1: (rect(1, PhaseLabel.ALITE, 2, 2, 6, 6),)})


def test_empty_detections_report_zero():
    gts = {1: [rect(1, PhaseLabel.BELITE, 2, 2, 6, 6)]}
    sweep = best_f1_threshold({}, gts)
    assert sweep.threshold == 0.0
    assert sweep.scores[PhaseLabel.BELITE].fn == 1
    assert sweep.scores[MACRO].f1 == 0.0


def test_cutoff_grid():
    assert sweep_cutoffs(0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert len(sweep_cutoffs(0.01)) == 101
    with pytest.raises(ParameterError):
        sweep_cutoffs(0.0)
