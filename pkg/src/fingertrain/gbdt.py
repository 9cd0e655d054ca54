"""Minimal gradient-boosted decision trees for downstream prediction.

Newton boosting with exact split finding over sorted feature values and
leaf-wise growth to a leaf budget; a functional stand-in for the usual
gradient-boosting dependency, not a re-implementation of it. Supports
squared-error regression and logistic binary classification, per-tree
feature and row subsampling, and L2 leaf regularisation. Zero-variance
features are screened out per training split before fitting.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from fingertrain import kernels
from fingertrain.errors import ConfigError, DataError

OBJECTIVES = ("squared_error", "logistic")


@dataclass(frozen=True)
class GbdtConfig:
    n_estimators: int = 200
    learning_rate: float = 0.05
    num_leaves: int = 31
    min_data_in_leaf: int = 5
    feature_fraction: float = 1.0
    bagging_fraction: float = 1.0
    reg_lambda: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_leaves < 2:
            raise ConfigError("num_leaves must be >= 2")
        if not (0.0 < self.feature_fraction <= 1.0 and 0.0 < self.bagging_fraction <= 1.0):
            raise ConfigError("fractions must be in (0, 1]")
        if self.n_estimators < 0 or self.learning_rate <= 0:
            raise ConfigError("need n_estimators >= 0 and learning_rate > 0")


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeNode":
        if "value" in doc:
            return cls(value=doc["value"])
        return cls(
            feature=doc["feature"],
            threshold=doc["threshold"],
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )


@dataclass
class GbdtModel:
    trees: list[TreeNode]
    base_score: float
    objective: str
    kept_features: np.ndarray
    learning_rate: float
    config: GbdtConfig
    train_loss_curve: list[float] = field(default_factory=list)
    training_score_: np.ndarray | None = None  # raw scores on the fit data

    def raw_predict(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if self.kept_features.size and features.shape[1] <= int(self.kept_features.max()):
            raise DataError(
                f"feature width {features.shape[1]} too small for kept feature index {int(self.kept_features.max())}"
            )
        out = np.full(features.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * _eval_tree(tree, features)
        return out

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Regression value or positive-class probability."""
        raw = self.raw_predict(features)
        if self.objective == "logistic":
            return 1.0 / (1.0 + np.exp(-np.clip(raw, -709, 709)))
        return raw


def _eval_tree(node: TreeNode, features: np.ndarray) -> np.ndarray:
    out = np.empty(features.shape[0], dtype=np.float64)
    stack = [(node, np.arange(features.shape[0]))]
    while stack:
        cur, idx = stack.pop()
        if cur.is_leaf:
            out[idx] = cur.value
            continue
        mask = features[idx, cur.feature] < cur.threshold
        stack.append((cur.left, idx[mask]))
        stack.append((cur.right, idx[~mask]))
    return out


def _gradients(objective: str, y: np.ndarray, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if objective == "squared_error":
        return raw - y, np.ones_like(y)
    prob = 1.0 / (1.0 + np.exp(-np.clip(raw, -709, 709)))
    return prob - y, np.maximum(prob * (1.0 - prob), 1e-12)


def _loss(objective: str, y: np.ndarray, raw: np.ndarray) -> float:
    if objective == "squared_error":
        return float(np.mean((raw - y) ** 2))
    z = np.clip(raw, -709, 709)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


@dataclass(order=True)
class _LeafCandidate:
    neg_gain: float
    tiebreak: int
    rows: np.ndarray = field(compare=False)
    feature: int = field(compare=False, default=-1)
    pos: int = field(compare=False, default=-1)
    threshold: float = field(compare=False, default=0.0)
    node: TreeNode = field(compare=False, default=None)


def fit(
    features: np.ndarray,
    labels: np.ndarray,
    objective: str = "squared_error",
    config: GbdtConfig = GbdtConfig(),
) -> GbdtModel:
    """Boosted trees on a feature matrix; deterministic under the config seed."""
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if objective not in OBJECTIVES:
        raise ConfigError(f"unknown objective {objective!r}")
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError("features must be (n, f) with one label per row")
    n, n_features = X.shape
    if n < config.min_data_in_leaf:
        raise DataError(f"{n} rows is fewer than min_data_in_leaf={config.min_data_in_leaf}")

    col_min = X.min(axis=0)
    col_max = X.max(axis=0)
    kept = np.flatnonzero(col_max > col_min)

    if objective == "squared_error":
        base = float(y.mean())
    else:
        if set(np.unique(y)) - {0.0, 1.0}:
            raise DataError("logistic objective needs 0/1 labels")
        p = min(max(float(y.mean()), 1e-12), 1.0 - 1e-12)
        base = float(np.log(p / (1.0 - p)))

    raw = np.full(n, base, dtype=np.float64)
    trees: list[TreeNode] = []
    curve = [_loss(objective, y, raw)]
    rng = np.random.default_rng(config.seed)

    single_class = objective == "logistic" and np.unique(y).size < 2
    rounds = 0 if single_class or kept.size == 0 else config.n_estimators

    for _ in range(rounds):
        grad, hess = _gradients(objective, y, raw)
        rows = _bag_rows(rng, n, config.bagging_fraction)
        cols = _bag_cols(rng, kept, config.feature_fraction)
        tree = _grow_tree(X, grad, hess, rows, cols, config)
        trees.append(tree)
        raw += config.learning_rate * _eval_tree(tree, X)
        curve.append(_loss(objective, y, raw))

    return GbdtModel(
        trees=trees,
        base_score=base,
        objective=objective,
        kept_features=kept,
        learning_rate=config.learning_rate,
        config=config,
        train_loss_curve=curve,
        training_score_=raw,
    )


def _bag_rows(rng: np.random.Generator, n: int, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(n)
    size = max(1, int(round(fraction * n)))
    return np.sort(rng.choice(n, size=size, replace=False))


def _bag_cols(rng: np.random.Generator, kept: np.ndarray, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return kept
    size = max(1, int(round(fraction * kept.size)))
    return np.sort(rng.choice(kept, size=size, replace=False))


def _leaf_value(grad_sum: float, hess_sum: float, reg_lambda: float) -> float:
    return -grad_sum / (hess_sum + reg_lambda)


def _best_split_of_node(X, grad, hess, rows, cols, config) -> tuple[float, int, int, float]:
    """(gain, feature, left_count, threshold); gain -inf when unsplittable.

    All candidate columns are sorted and scanned in one batched kernel call;
    ties resolve to the smaller column index then the smaller position.
    """
    if rows.size < 2 * config.min_data_in_leaf or cols.size == 0:
        return float("-inf"), -1, -1, 0.0
    sub = X[np.ix_(rows, cols)]
    order = np.argsort(sub, axis=0, kind="stable")
    vs = np.take_along_axis(sub, order, axis=0)
    gs = grad[rows][order]
    hs = hess[rows][order]
    gain, col, pos = kernels.scan_split_columns(vs, gs, hs, config.min_data_in_leaf, config.reg_lambda)
    if col < 0:
        return float("-inf"), -1, -1, 0.0
    thr = 0.5 * (vs[pos - 1, col] + vs[pos, col])
    if thr <= vs[pos - 1, col]:
        thr = float(vs[pos, col])
    return float(gain), int(cols[col]), int(pos), float(thr)


def _grow_tree(X, grad, hess, rows, cols, config) -> TreeNode:
    root = TreeNode(value=_leaf_value(grad[rows].sum(), hess[rows].sum(), config.reg_lambda))
    counter = itertools.count()
    heap: list[_LeafCandidate] = []

    def push(node: TreeNode, node_rows: np.ndarray) -> None:
        gain, f, pos, thr = _best_split_of_node(X, grad, hess, node_rows, cols, config)
        if f >= 0 and gain > 0.0:
            heapq.heappush(heap, _LeafCandidate(-gain, next(counter), node_rows, f, pos, thr, node))

    push(root, rows)
    n_leaves = 1
    while heap and n_leaves < config.num_leaves:
        cand = heapq.heappop(heap)
        node = cand.node
        values = X[cand.rows, cand.feature]
        order = np.argsort(values, kind="stable")
        sorted_rows = cand.rows[order]
        left_rows = sorted_rows[: cand.pos]
        right_rows = sorted_rows[cand.pos :]
        node.feature = cand.feature
        node.threshold = cand.threshold
        node.left = TreeNode(value=_leaf_value(grad[left_rows].sum(), hess[left_rows].sum(), config.reg_lambda))
        node.right = TreeNode(value=_leaf_value(grad[right_rows].sum(), hess[right_rows].sum(), config.reg_lambda))
        n_leaves += 1
        push(node.left, left_rows)
        push(node.right, right_rows)
    return root


# -- persistence ---------------------------------------------------------------


def save_gbdt(model: GbdtModel, path: str | Path) -> None:
    doc = {
        "format_version": 1,
        "objective": model.objective,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "kept_features": model.kept_features.tolist(),
        "config": asdict(model.config),
        "trees": [t.to_dict() for t in model.trees],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_gbdt(path: str | Path) -> GbdtModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != 1:
        raise ConfigError(f"unsupported predictor format version {doc.get('format_version')!r}")
    return GbdtModel(
        trees=[TreeNode.from_dict(t) for t in doc["trees"]],
        base_score=doc["base_score"],
        objective=doc["objective"],
        kept_features=np.asarray(doc["kept_features"], dtype=np.int64),
        learning_rate=doc["learning_rate"],
        config=GbdtConfig(**doc["config"]),
    )
