import numpy as np
import pytest

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.evaluation.evaluation_precision_recall_metrics import (
    average_scores, f1_from_pr, label_prf, mask_iou, prf_from_counts)
from clinker.raster.raster_pixel_grid_types import BinaryMask, PhaseLabel

from conftest import rectangle_mask


@pytest.mark.parametrize("precision, recall, expected", [
    (0.956, 0.957, 0.956),
    (0.958, 0.913, 0.935),
    (0.945, 0.847, 0.893),
    (0.963, 0.805, 0.877),
])
def test_f1_of_reported_phase_scores(precision, recall, expected):
    assert f1_from_pr(precision, recall) == pytest.approx(expected, abs=0.0015)


@pytest.mark.parametrize("precision, recall, expected", [(0.90, 0.87, 0.88), (0.95, 0.96, 0.95)])
def test_f1_of_two_digit_scores(precision, recall, expected):
    assert f1_from_pr(precision, recall) == pytest.approx(expected, abs=0.005)


def test_f1_edge_cases():
    assert f1_from_pr(0.0, 0.0) == 0.0
    assert f1_from_pr(1.0, 1.0) == 1.0
    with pytest.raises(ParameterError):
        f1_from_pr(1.2, 0.5)


def test_counts_with_empty_denominators():
    assert prf_from_counts(0, 0, 0).f1 == 0.0
    scores = prf_from_counts(3, 1, 2)
    assert (scores.precision, scores.recall) == (0.75, 0.6)
    assert scores.to_dict() == {"precision": 0.75, "recall": 0.6, "f1": scores.f1, "tp": 3, "fp": 1, "fn": 2}


def test_label_prf_is_one_vs_rest():
    truth = np.array([0, 1, 1, 2, 2, 2])
    predicted = np.array([1, 1, 0, 2, 2, 1])
    alite = label_prf(predicted, truth, PhaseLabel.ALITE)
    assert (alite.tp, alite.fp, alite.fn) == (1, 2, 1)
    with pytest.raises(DataError):
        label_prf(predicted[:3], truth, PhaseLabel.ALITE)


def test_macro_and_micro_averages_differ():
    scores = [prf_from_counts(9, 1, 0), prf_from_counts(0, 0, 10)]
    macro = average_scores(scores, "macro")
    micro = average_scores(scores, "micro")
    assert macro.precision == pytest.approx(0.45)
    assert micro.precision == pytest.approx(0.9)
    assert micro.recall == pytest.approx(9 / 19)
    assert (macro.tp, macro.fp, macro.fn) == (9, 1, 10)
    with pytest.raises(ParameterError):
        average_scores(scores, "weighted")


def test_mask_iou():
    a = rectangle_mask(10, 10, 0, 0, 4, 4)
    b = rectangle_mask(10, 10, 2, 0, 4, 4)
    assert mask_iou(a, b) == pytest.approx(8 / 24)
    empty = BinaryMask.empty(10, 10)
    assert mask_iou(empty, empty) == 0.0
    with pytest.raises(DataError):
        mask_iou(a, BinaryMask.empty(5, 5))
