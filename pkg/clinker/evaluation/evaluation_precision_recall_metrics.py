from dataclasses import asdict, dataclass

import numpy as np

from clinker.clinker_job_errors import DataError, ParameterError


@dataclass(frozen=True)
class PrfScores:
    """Precision, recall and F1 with the counts behind them; 0/0 is taken as 0."""

    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self):
        return asdict(self)


ZERO_SCORES = PrfScores(0.0, 0.0, 0.0)


def _ratio(numerator, denominator):
    return numerator / denominator if denominator else 0.0


def f1_from_pr(p, r):
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
        raise ParameterError(f"Precision and recall must lie in [0, 1], got ({p}, {r})")
    return _ratio(2.0 * p * r, p + r)


def prf_from_counts(tp, fp, fn):
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return PrfScores(precision, recall, f1_from_pr(precision, recall), int(tp), int(fp), int(fn))


def label_prf(predicted, truth, phase):
    """One-vs-rest PRF of ``phase`` over two equally shaped arrays of PhaseLabel codes."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DataError(f"Label arrays differ in shape: {predicted.shape} vs {truth.shape}")
    is_pred = predicted == int(phase)
    is_true = truth == int(phase)
    return prf_from_counts(
        int(np.count_nonzero(is_pred & is_true)),
        int(np.count_nonzero(is_pred & ~is_true)),
        int(np.count_nonzero(~is_pred & is_true)),
    )


def pixel_prf(pred, gt, phase):
    if pred.labels.shape != gt.labels.shape:
        raise DataError(f"Label maps differ in size: {pred.width}x{pred.height} vs {gt.width}x{gt.height}")
    return label_prf(pred.labels, gt.labels, phase)


def mask_iou(a, b):
    """Intersection over union of two masks; two empty masks give 0."""
    if a.bits.shape != b.bits.shape:
        raise DataError(f"Masks differ in size: {a.width}x{a.height} vs {b.width}x{b.height}")
    union = int(np.count_nonzero(a.bits | b.bits))
    return _ratio(int(np.count_nonzero(a.bits & b.bits)), union)


def average_scores(scores, mode="macro"):
    """
    Combines per-phase scores.

    macro averages precision, recall and F1 separately; micro recomputes them
    from the pooled counts. Counts are summed in both cases.
    """
    scores = list(scores)
    tp = sum(s.tp for s in scores)
    fp = sum(s.fp for s in scores)
    fn = sum(s.fn for s in scores)
    if mode == "micro":
        return prf_from_counts(tp, fp, fn)
    if mode != "macro":
        raise ParameterError(f"Unknown averaging mode '{mode}', expected 'macro' or 'micro'")
    if not scores:
        return ZERO_SCORES
    count = len(scores)
    return PrfScores(
        sum(s.precision for s in scores) / count,
        sum(s.recall for s in scores) / count,
        sum(s.f1 for s in scores) / count,
        tp, fp, fn,
    )
