import logging
from itertools import product

import numpy as np

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.evaluation.evaluation_precision_recall_metrics import average_scores, label_prf, pixel_prf
from clinker.mow.mow_gradient_boosted_trees import GbdtHyperparameters, fit_gbdt
from clinker.mow.mow_sample_windows_dataset import SampleSplit
from clinker.raster.raster_load_images_features import neighborhood_feature_matrix
from clinker.raster.raster_pixel_grid_types import LabelMap, PhaseLabel

logger = logging.getLogger(__name__)

PREDICTION_CHUNK_PIXELS = 65536


def hyperparameter_grid(n_trees=(100,), max_depth=(4,), learning_rate=(0.1,), subsample=(1.0,)):
    """Cartesian grid of GbdtHyperparameters in a fixed order."""
    return [
        GbdtHyperparameters(n_trees=t, max_depth=d, learning_rate=lr, subsample=s)
        for d, lr, s, t in product(max_depth, learning_rate, subsample, n_trees)
    ]


def macro_f1(predicted, truth, classes):
    return average_scores([label_prf(predicted, truth, phase) for phase in classes], "macro").f1


def train_gbdt(ds, grid=None, seed=0, class_weighting=False, workers=1):
    """
    Trains every grid point on the Train split and keeps the best on Val.

    Grid points that differ only in tree count share one fitted ensemble, cut
    to each count. The winner has the highest Val macro-F1, then the fewest
    trees, then the lowest depth, then the earliest grid position.
    """
    grid = list(grid) if grid is not None else hyperparameter_grid()
    if not grid:
        raise ParameterError("The hyperparameter grid is empty")
    train_rows = ds.rows(SampleSplit.TRAIN)
    val_rows = ds.rows(SampleSplit.VAL)
    if train_rows.size == 0:
        raise DataError("The Train split is empty; call split_samples first")
    if val_rows.size == 0:
        logger.warning("The Val split is empty, selecting hyperparameters on Train")
        val_rows = train_rows

    X_train, y_train = ds.features[train_rows], ds.labels[train_rows]
    X_val, y_val = ds.features[val_rows], ds.labels[val_rows]

    groups = {}
    for position, params in enumerate(grid):
        groups.setdefault(params.ensemble_key(), []).append((position, params))

    candidates = []
    for members in groups.values():
        largest = max(params.n_trees for _, params in members)
        base_params = members[0][1]
        logger.info(f"Starting to fit {largest} tree(s) per class, depth {base_params.max_depth}, "
                    f"learning rate {base_params.learning_rate}, subsample {base_params.subsample}")
        full = fit_gbdt(X_train, y_train, GbdtHyperparameters(
            n_trees=largest,
            max_depth=base_params.max_depth,
            learning_rate=base_params.learning_rate,
            subsample=base_params.subsample,
            min_leaf=base_params.min_leaf,
        ), seed=seed, class_weighting=class_weighting, workers=workers)
        for position, params in members:
            model = full if params.n_trees == largest else full.truncated(params.n_trees)
            score = macro_f1(model.predict(X_val), y_val, model.classes)
            logger.info(f"Grid point {position} {params}: Val macro-F1 {score:.4f}")
            candidates.append((-score, params.n_trees, params.max_depth, position, model, params))

    candidates.sort(key=lambda c: c[:4])
    best_score, _, _, position, model, params = candidates[0]
    selection = {"grid_position": position, "val_macro_f1": -best_score, "grid_size": len(grid)}
    model = type(model)(model.classes, model.ensembles, params, model.feature_width, selection)
    logger.info(f"Successfully selected grid point {position} with Val macro-F1 {-best_score:.4f}")
    return model


def predict_pixels(model, img, p):
    """Classifies every pixel of ``img`` from its p x p neighbourhood."""
    if img.channels * p * p != model.feature_width:
        raise DataError(
            f"Image gives {img.channels}x{p}x{p}={img.channels * p * p} features per pixel, "
            f"the model expects {model.feature_width}"
        )
    features = neighborhood_feature_matrix(img, p)
    predicted = np.empty(features.shape[0], dtype=np.uint8)
    for start in range(0, features.shape[0], PREDICTION_CHUNK_PIXELS):
        stop = start + PREDICTION_CHUNK_PIXELS
        predicted[start:stop] = model.predict(features[start:stop])
    logger.info(f"Predicted {features.shape[0]} pixel label(s)")
    return LabelMap(predicted.reshape(img.height, img.width))


def pixel_report(predicted, truth, phases=tuple(PhaseLabel)):
    """Per-phase pixel PRF of two label maps and their macro average."""
    scores = {PhaseLabel(phase): pixel_prf(predicted, truth, phase) for phase in phases}
    return scores, average_scores(list(scores.values()), "macro")


def split_report(model, ds, split=SampleSplit.TEST):
    """Per-phase PRF of the model on one split of the dataset, with the macro average."""
    rows = ds.rows(split)
    if rows.size == 0:
        raise DataError(f"The {SampleSplit(split).name.title()} split is empty")
    predicted = model.predict(ds.features[rows])
    truth = ds.labels[rows]
    scores = {PhaseLabel(phase): label_prf(predicted, truth, phase) for phase in model.classes}
    return scores, average_scores(list(scores.values()), "macro")
