"""Error metrics, resolution binning/confusion, and parameter sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EvalError(Exception):
    pass


class EmptyAfterExclusion(EvalError):
    pass


class AllExcluded(EvalError):
    pass


class UnknownClass(EvalError):
    pass


def _paired(pred, truth):
    """Drop pairs where either side is missing (None/nan)."""
    if len(pred) != len(truth):
        raise EvalError(f"length mismatch {len(pred)} != {len(truth)}")
    p, t = [], []
    for a, b in zip(pred, truth):
        if a is None or b is None:
            continue
        a, b = float(a), float(b)
        if np.isnan(a) or np.isnan(b):
            continue
        p.append(a)
        t.append(b)
    return np.asarray(p), np.asarray(t)


def mae(pred, truth):
    p, t = _paired(pred, truth)
    if len(p) == 0:
        raise EmptyAfterExclusion("no valid pairs")
    return float(np.mean(np.abs(p - t)))


def mrae(pred, truth):
    """Mean |error|/truth; zero-truth pairs are excluded. Returns
    (value, excluded_count)."""
    p, t = _paired(pred, truth)
    keep = t > 0
    excluded = int(len(t) - keep.sum())
    if not keep.any():
        raise AllExcluded("every pair has zero ground truth")
    value = float(np.mean(np.abs(p[keep] - t[keep]) / t[keep]))
    return value, excluded


def within_tolerance(pred, truth, tol):
    p, t = _paired(pred, truth)
    if len(p) == 0:
        raise EmptyAfterExclusion("no valid pairs")
    return float(np.mean(np.abs(p - t) <= tol))


@dataclass(frozen=True)
class ResolutionBinning:
    """Frame-height classes: either one class per distinct height, or three
    bins (low <= 240 < medium <= 480 < high)."""
    mode: str = "binned"
    edges: tuple = (240, 480)
    labels: tuple = ("low", "medium", "high")

    def __post_init__(self):
        if list(self.edges) != sorted(set(self.edges)):
            raise ValueError("edges must be strictly increasing")

    def classify(self, height):
        if self.mode == "per_value":
            return str(int(height))
        for edge, label in zip(self.edges, self.labels):
            if height <= edge:
                return label
        return self.labels[len(self.edges)]

    def class_set(self, heights=()):
        if self.mode == "per_value":
            return [str(int(h)) for h in sorted(set(heights))]
        return list(self.labels)


def binning_for_heights(heights):
    """Per-value classes when few distinct heights exist, three bins
    otherwise."""
    distinct = set(int(h) for h in heights)
    if len(distinct) <= 5:
        return ResolutionBinning(mode="per_value")
    return ResolutionBinning(mode="binned")


@dataclass
class ConfusionMatrix:
    classes: list
    counts: list          # rows actual, columns predicted
    row_percent: list
    row_totals: list

    def accuracy(self):
        total = sum(self.row_totals)
        if total == 0:
            return 0.0
        return sum(self.counts[i][i] for i in range(len(self.classes))) / total


def resolution_confusion(pred_classes, truth_classes, binning=None,
                         classes=None):
    """Row-normalized confusion matrix (percent) with per-row totals."""
    if classes is None:
        classes = (binning.class_set(truth_classes) if binning is not None
                   else sorted(set(truth_classes) | set(pred_classes)))
    index = {c: i for i, c in enumerate(classes)}
    k = len(classes)
    counts = [[0] * k for _ in range(k)]
    for p, t in zip(pred_classes, truth_classes):
        if p not in index or t not in index:
            raise UnknownClass(f"class {p if p not in index else t!r}")
        counts[index[t]][index[p]] += 1
    totals = [sum(row) for row in counts]
    percent = [[(100.0 * c / tot if tot else 0.0) for c in row]
               for row, tot in zip(counts, totals)]
    return ConfusionMatrix(list(classes), counts, percent, totals)


@dataclass
class EvalReport:
    """Per-metric summary for one estimator/method."""
    metric: str
    mae: float
    mrae: float = None
    within_tolerance: dict = field(default_factory=dict)
    n_pairs: int = 0
    n_excluded: int = 0
    residuals: list = field(default_factory=list)

    def to_dict(self):
        return {"metric": self.metric, "mae": self.mae, "mrae": self.mrae,
                "within_tolerance": self.within_tolerance,
                "n_pairs": self.n_pairs, "n_excluded": self.n_excluded}


def evaluate_metric(pred, truth, metric, tolerances=()):
    p, t = _paired(pred, truth)
    if len(p) == 0:
        raise EmptyAfterExclusion("no valid pairs")
    residuals = (p - t).tolist()
    report = EvalReport(
        metric=metric,
        mae=float(np.mean(np.abs(p - t))),
        n_pairs=len(p),
        n_excluded=len(pred) - len(p),
        residuals=residuals)
    keep = t > 0
    if keep.any():
        report.mrae = float(np.mean(np.abs(p[keep] - t[keep]) / t[keep]))
    for tol in tolerances:
        report.within_tolerance[str(tol)] = float(
            np.mean(np.abs(p - t) <= tol))
    return report


def sweep(runner, axis_values):
    """Run a parameterized experiment once per axis value.

    runner(value) -> float (typically an MAE); returns [(value, result)].
    """
    if not axis_values:
        raise EvalError("axis values list is empty")
    return [(v, runner(v)) for v in axis_values]
