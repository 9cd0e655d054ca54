"""Evaluation metrics for regression, classification, and ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fingertrain.errors import UndefinedMetricError

REGRESSION_KINDS = ("r2", "pearson", "mape")
CLASSIFICATION_KINDS = ("auroc", "aucpr", "mcc", "ef")


@dataclass(frozen=True)
class MetricKind:
    kind: str
    ef_fraction: float | None = None

    def __post_init__(self):
        if self.kind not in REGRESSION_KINDS + CLASSIFICATION_KINDS:
            raise UndefinedMetricError(f"unknown metric kind {self.kind!r}")
        if self.kind == "ef":
            if self.ef_fraction is None or not 0.0 < self.ef_fraction <= 1.0:
                raise UndefinedMetricError("ef requires a fraction in (0, 1]")

    @property
    def higher_is_better(self) -> bool:
        return self.kind != "mape"

    def label(self) -> str:
        if self.kind == "ef":
            return f"ef{self.ef_fraction:g}"
        return self.kind


def parse_metric(label: str) -> MetricKind:
    if label.startswith("ef"):
        return MetricKind("ef", float(label[2:]))
    return MetricKind(label)


def compute_metric(kind: MetricKind, truth, pred) -> float:
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise UndefinedMetricError("truth and prediction must be equal-length vectors")
    if kind.kind == "r2":
        return r2(truth, pred)
    if kind.kind == "pearson":
        return pearson(truth, pred)
    if kind.kind == "mape":
        return mape(truth, pred)[0]
    if kind.kind == "auroc":
        return auroc(truth, pred)
    if kind.kind == "aucpr":
        return aucpr(truth, pred)
    if kind.kind == "mcc":
        return mcc(truth, pred)
    return enrichment_factor(truth, pred, kind.ef_fraction)


def r2(truth: np.ndarray, pred: np.ndarray) -> float:
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise UndefinedMetricError("r2 undefined for constant truth")
    ss_res = float(((truth - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def pearson(truth: np.ndarray, pred: np.ndarray) -> float:
    st = truth.std()
    sp = pred.std()
    if st == 0.0 or sp == 0.0:
        raise UndefinedMetricError("pearson undefined for a constant vector")
    return float(((truth - truth.mean()) * (pred - pred.mean())).mean() / (st * sp))


def mape(truth: np.ndarray, pred: np.ndarray) -> tuple[float, int]:
    """Mean absolute percentage error over y != 0, with the exclusion count."""
    mask = truth != 0.0
    excluded = int((~mask).sum())
    if not mask.any():
        raise UndefinedMetricError("mape undefined: every truth value is zero")
    value = float(100.0 * np.abs((truth[mask] - pred[mask]) / truth[mask]).mean())
    return value, excluded


def _require_binary(truth: np.ndarray) -> None:
    classes = set(np.unique(truth))
    if not classes <= {0.0, 1.0}:
        raise UndefinedMetricError("classification metrics need 0/1 truth labels")
    if len(classes) < 2:
        raise UndefinedMetricError("classification metrics need both classes present")


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(truth: np.ndarray, scores: np.ndarray) -> float:
    """Rank statistic (Mann-Whitney) with tie midranks."""
    _require_binary(truth)
    ranks = _midranks(scores)
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    u = float(ranks[truth == 1.0].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def aucpr(truth: np.ndarray, scores: np.ndarray) -> float:
    """Precision-recall step integration; tied scores form one threshold."""
    _require_binary(truth)
    order = np.argsort(-scores, kind="stable")
    y = truth[order]
    s = scores[order]
    n_pos = float(truth.sum())
    tp = 0.0
    fp = 0.0
    prev_recall = 0.0
    area = 0.0
    i = 0
    n = len(y)
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        tp += float(y[i : j + 1].sum())
        fp += float(j - i + 1 - y[i : j + 1].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return area


def mcc(truth: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> float:
    """Matthews correlation at a probability threshold; 0 when degenerate."""
    _require_binary(truth)
    pred = (scores >= threshold).astype(np.float64)
    tp = float(((pred == 1) & (truth == 1)).sum())
    tn = float(((pred == 0) & (truth == 0)).sum())
    fp = float(((pred == 1) & (truth == 0)).sum())
    fn = float(((pred == 0) & (truth == 1)).sum())
    denom = np.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / denom


def enrichment_factor(truth: np.ndarray, scores: np.ndarray, fraction: float) -> float:
    """Active rate in the top ceil(fraction * n) by score over the base rate.

    Ties in score break by ascending record index, making the cut
    deterministic.
    """
    _require_binary(truth)
    n = len(truth)
    top = int(np.ceil(fraction * n))
    order = np.lexsort((np.arange(n), -scores))
    actives_top = float(truth[order[:top]].sum())
    base_rate = float(truth.sum()) / n
    return (actives_top / top) / base_rate


def fold_mean(values, dropped) -> float:
    """Mean metric over the non-dropped folds of one repeat."""
    vals = [v for v, d in zip(values, dropped) if not d]
    if not vals:
        raise UndefinedMetricError("every fold of the repeat was dropped")
    return float(np.mean(vals))


@dataclass
class MetricVector:
    method: str
    dataset: str
    metric: MetricKind
    per_repeat: np.ndarray
    folds_used: list[int]

    def __post_init__(self):
        self.per_repeat = np.asarray(self.per_repeat, dtype=np.float64)
        if len(self.folds_used) != self.per_repeat.shape[0]:
            raise UndefinedMetricError("folds_used must align with per_repeat")
