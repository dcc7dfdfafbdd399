"""
One-vs-rest gradient boosted regression trees on the logistic loss.

Each class gets an additive model F = base + sum of trees. Trees are grown
depth by depth with exact greedy splits on second-order gain, leaves take
the Newton step -G/H, and every tree is shrunk by the learning rate.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit

from clinker.clinker_job_errors import DataError, ParameterError
from clinker.raster.raster_pixel_grid_types import PhaseLabel

logger = logging.getLogger(__name__)

MODEL_FORMAT = "clinker-gbdt"
MODEL_VERSION = 1
MIN_SPLIT_GAIN = 1e-12
MIN_HESSIAN = 1e-16
MAX_STEP_HALVINGS = 30


@dataclass(frozen=True)
class GbdtHyperparameters:
    n_trees: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    subsample: float = 1.0
    min_leaf: int = 5

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ParameterError(f"Tree counts, depth and leaf size must be positive: {self}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ParameterError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if not 0.0 < self.subsample <= 1.0:
            raise ParameterError(f"subsample must lie in (0, 1], got {self.subsample}")

    def ensemble_key(self):
        """Grid points sharing this key differ only in tree count."""
        return self.max_depth, self.learning_rate, self.subsample, self.min_leaf


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Array-encoded binary tree; ``feature`` is -1 on leaves and rows go left when x < threshold."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            current = node[active]
            goes_left = X[active, self.feature[current]] < self.threshold[current]
            node[active] = np.where(goes_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]

    def scaled(self, factor):
        return RegressionTree(self.feature, self.threshold, self.left, self.right, self.value * factor)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int64),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int64),
            right=np.asarray(doc["right"], dtype=np.int64),
            value=np.asarray(doc["value"], dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class ClassEnsemble:
    phase: PhaseLabel
    base_score: float
    trees: Tuple[RegressionTree, ...]
    loss_history: Tuple[float, ...] = ()

    def truncated(self, n_trees):
        return ClassEnsemble(self.phase, self.base_score, self.trees[:n_trees], self.loss_history[:n_trees + 1])

    def decision_function(self, X):
        scores = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            scores += tree.predict(X)
        return scores


@dataclass(frozen=True, eq=False)
class GbdtModel:
    classes: Tuple[PhaseLabel, ...]
    ensembles: Tuple[ClassEnsemble, ...]
    hyperparameters: GbdtHyperparameters
    feature_width: int
    selection: dict = field(default_factory=dict)

    def predict_scores(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_width:
            raise DataError(f"Expected {self.feature_width} feature(s) per sample, got shape {X.shape}")
        return np.column_stack([ensemble.decision_function(X) for ensemble in self.ensembles])

    def predict(self, X):
        """Class of the highest score; ties go to the earlier class in Other < Alite < Belite order."""
        scores = self.predict_scores(X)
        return np.asarray(self.classes, dtype=np.uint8)[np.argmax(scores, axis=1)]

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "feature_width": self.feature_width,
            "classes": [phase.display_name for phase in self.classes],
            "hyperparameters": asdict(self.hyperparameters),
            "selection": self.selection,
            "ensembles": [
                {
                    "class": ensemble.phase.display_name,
                    "base_score": ensemble.base_score,
                    "loss_history": list(ensemble.loss_history),
                    "trees": [tree.to_dict() for tree in ensemble.trees],
                }
                for ensemble in self.ensembles
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError(f"Not a {MODEL_FORMAT} v{MODEL_VERSION} model document")
        ensembles = tuple(
            ClassEnsemble(
                phase=PhaseLabel.from_name(entry["class"]),
                base_score=float(entry["base_score"]),
                trees=tuple(RegressionTree.from_dict(tree) for tree in entry["trees"]),
                loss_history=tuple(entry.get("loss_history", ())),
            )
            for entry in doc["ensembles"]
        )
        return cls(
            classes=tuple(PhaseLabel.from_name(name) for name in doc["classes"]),
            ensembles=ensembles,
            hyperparameters=GbdtHyperparameters(**doc["hyperparameters"]),
            feature_width=int(doc["feature_width"]),
            selection=dict(doc.get("selection", {})),
        )

    def truncated(self, n_trees):
        hyperparameters = GbdtHyperparameters(**{**asdict(self.hyperparameters), "n_trees": n_trees})
        return GbdtModel(self.classes, tuple(e.truncated(n_trees) for e in self.ensembles),
                         hyperparameters, self.feature_width)


def _logistic_loss(scores, targets, weights):
    return float(np.sum(weights * (np.logaddexp(0.0, scores) - targets * scores)))


def _candidate_positions(X, order, node_of, node, min_leaf, feature):
    """Node rows sorted by ``feature`` and the positions a split may follow."""
    column = order[:, feature]
    rows = column[node_of[column] == node]
    if rows.size < 2 * min_leaf:
        return rows, None, None
    values = X[rows, feature]
    # split after position i keeps rows[:i + 1] on the left
    positions = np.arange(min_leaf - 1, rows.size - min_leaf)
    positions = positions[values[positions] != values[positions + 1]]
    return rows, values, positions if positions.size else None


def _best_split(X, order, node_of, node, g, h, min_leaf, feature):
    rows, values, positions = _candidate_positions(X, order, node_of, node, min_leaf, feature)
    if positions is None:
        return None
    g_left = np.cumsum(g[rows])
    h_left = np.cumsum(h[rows])
    g_total, h_total = g_left[-1], h_left[-1]
    gl, hl = g_left[positions], np.maximum(h_left[positions], MIN_HESSIAN)
    gr, hr = g_total - gl, np.maximum(h_total - h_left[positions], MIN_HESSIAN)
    gain = gl * gl / hl + gr * gr / hr - g_total * g_total / max(h_total, MIN_HESSIAN)
    best = int(np.argmax(gain))
    i = positions[best]
    return float(gain[best]), float((values[i] + values[i + 1]) / 2.0)


def _median_split(X, order, node_of, node, min_leaf, feature):
    """Threshold nearest the node median, for nodes where no split gains on its own."""
    rows, values, positions = _candidate_positions(X, order, node_of, node, min_leaf, feature)
    if positions is None:
        return None
    i = positions[int(np.argmin(np.abs(positions + 1 - rows.size / 2.0)))]
    return 0.0, float((values[i] + values[i + 1]) / 2.0)


def _mixed(node_g):
    return bool(np.any(node_g > 0) and np.any(node_g < 0))


def grow_tree(X, order, g, h, in_sample, max_depth, min_leaf):
    """
    Grows one regression tree level by level.

    A node whose best split gains nothing but still mixes classes (balanced
    XOR-like cells) is split at the median of the first splittable feature
    while at least two levels remain, so the level below can separate it.

    :param X: float64 feature matrix.
    :param order: Per-feature row orders, ``order[:, f]`` sorts column f (stable).
    :param g: Gradients.
    :param h: Hessians.
    :param in_sample: Rows taking part in this tree.
    """
    node_of = np.where(in_sample, 0, -1)
    feature, threshold, left, right = [-1], [0.0], [-1], [-1]
    frontier = [0]
    for level in range(max_depth):
        next_frontier = []
        for node in frontier:
            best = None
            for f in range(X.shape[1]):
                found = _best_split(X, order, node_of, node, g, h, min_leaf, f)
                if found is not None and found[0] > MIN_SPLIT_GAIN and (best is None or found[0] > best[0]):
                    best = (found[0], f, found[1])
            if best is None and max_depth - level >= 2 and _mixed(g[node_of == node]):
                for f in range(X.shape[1]):
                    found = _median_split(X, order, node_of, node, min_leaf, f)
                    if found is not None:
                        best = (found[0], f, found[1])
                        break
            if best is None:
                continue
            _, f, thr = best
            left_id, right_id = len(feature), len(feature) + 1
            feature[node], threshold[node], left[node], right[node] = f, thr, left_id, right_id
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            rows = np.flatnonzero(node_of == node)
            goes_left = X[rows, f] < thr
            node_of[rows[goes_left]] = left_id
            node_of[rows[~goes_left]] = right_id
            next_frontier += [left_id, right_id]
        if not next_frontier:
            break
        frontier = next_frontier

    n_nodes = len(feature)
    members = node_of >= 0
    g_sum = np.bincount(node_of[members], weights=g[members], minlength=n_nodes)
    h_sum = np.bincount(node_of[members], weights=h[members], minlength=n_nodes)
    feature = np.asarray(feature, dtype=np.int64)
    value = np.where(feature < 0, -g_sum / np.maximum(h_sum, MIN_HESSIAN), 0.0)
    return RegressionTree(
        feature=feature,
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=value,
    )


def fit_class_ensemble(X, order, targets, weights, params, phase, seed, class_index):
    """Boosts one one-vs-rest ensemble; the Train loss never increases between rounds."""
    positive = float(np.sum(weights * targets))
    negative = float(np.sum(weights * (1.0 - targets)))
    base = float(np.log(positive / negative))
    scores = np.full(X.shape[0], base)
    loss = _logistic_loss(scores, targets, weights)
    history = [loss]
    trees = []
    rng = np.random.default_rng([seed, class_index])
    sample_size = max(1, int(round(params.subsample * X.shape[0])))

    for _ in range(params.n_trees):
        prob = expit(scores)
        g = weights * (prob - targets)
        h = weights * np.maximum(prob * (1.0 - prob), MIN_HESSIAN)
        if sample_size < X.shape[0]:
            in_sample = np.zeros(X.shape[0], dtype=bool)
            in_sample[rng.choice(X.shape[0], size=sample_size, replace=False)] = True
        else:
            in_sample = np.ones(X.shape[0], dtype=bool)
        tree = grow_tree(X, order, g, h, in_sample, params.max_depth, params.min_leaf)
        update = tree.predict(X)
        step = params.learning_rate
        for _ in range(MAX_STEP_HALVINGS):
            candidate_loss = _logistic_loss(scores + step * update, targets, weights)
            if candidate_loss <= loss:
                break
            step /= 2.0
        else:
            step = 0.0
        shrunk = tree.scaled(step)
        if step > 0.0:
            scores = scores + shrunk.predict(X)
            loss = _logistic_loss(scores, targets, weights)
        trees.append(shrunk)
        history.append(loss)
    logger.debug(f"Fitted {len(trees)} tree(s) for class {phase.display_name}: loss {history[0]:.4f} -> {loss:.4f}")
    return ClassEnsemble(phase=phase, base_score=base, trees=tuple(trees), loss_history=tuple(history))


def canonical_row_order(X, y):
    """Lexicographic row order over (features..., label), so fitting ignores sample order."""
    keys = [y] + [X[:, f] for f in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def inverse_frequency_weights(y, classes):
    counts = {phase: int(np.count_nonzero(y == phase)) for phase in classes}
    weights = np.ones(y.shape[0], dtype=np.float64)
    for phase, count in counts.items():
        weights[y == phase] = y.shape[0] / (len(classes) * count)
    return weights


def fit_gbdt(X, y, params, seed=0, class_weighting=False, workers=1):
    """
    Fits a one-vs-rest model for the classes present in ``y``.

    :param X: (samples, features) matrix.
    :param y: PhaseLabel codes.
    :param params: GbdtHyperparameters.
    :param workers: Threads used across the per-class ensembles.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise DataError("Cannot train on an empty sample set")
    classes = tuple(PhaseLabel(int(c)) for c in np.unique(y))
    if len(classes) < 2:
        raise DataError(f"Training data holds a single class ({classes[0].display_name})")

    canonical = canonical_row_order(X, y)
    X, y = X[canonical], y[canonical]
    order = np.argsort(X, axis=0, kind="stable")
    weights = inverse_frequency_weights(y, classes) if class_weighting else np.ones(y.shape[0])

    def fit_one(index):
        phase = classes[index]
        targets = (y == phase).astype(np.float64)
        return fit_class_ensemble(X, order, targets, weights, params, phase, seed, index)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        ensembles = tuple(executor.map(fit_one, range(len(classes))))
    return GbdtModel(classes=classes, ensembles=ensembles, hyperparameters=params, feature_width=X.shape[1])
