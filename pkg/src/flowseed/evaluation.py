"""Mean intersection-over-union over pixel label maps.

Per-image confusion matrices can be computed in parallel and merged by
elementwise addition; pixels whose ground truth is the ignore label are
excluded from both numerator and denominator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyMatrix, IgnoreInPrediction
from .flow_io import IGNORE_LABEL


@dataclass(frozen=True)
class MiouResult:
    """Per-class IoU for classes with a non-zero union, and their mean."""

    per_class: dict[int, float]
    mean: float
    excluded: tuple[int, ...]


class ConfusionMatrix:
    """Accumulates counts[gt, pred] over label maps, ignore pixels skipped."""

    def __init__(self, n_classes: int, counts: np.ndarray | None = None):
        if n_classes < 1:
            raise ValueError("need at least one class")
        self.n_classes = n_classes
        if counts is None:
            counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        else:
            counts = np.asarray(counts, dtype=np.int64)
            if counts.shape != (n_classes, n_classes) or (counts < 0).any():
                raise ValueError("counts must be a non-negative n x n matrix")
        self.counts = counts

    def accumulate(self, gt: np.ndarray, pred: np.ndarray) -> "ConfusionMatrix":
        """Add one image pair's pixel counts; returns self for chaining."""
        gt = np.asarray(gt)
        pred = np.asarray(pred)
        if gt.shape != pred.shape:
            raise DimensionMismatch(f"gt is {gt.shape}, pred is {pred.shape}")
        if (pred == IGNORE_LABEL).any():
            raise IgnoreInPrediction("prediction contains the ignore label")
        valid = gt != IGNORE_LABEL
        g = gt[valid].astype(np.int64)
        p = pred[valid].astype(np.int64)
        if g.size and (g.max() >= self.n_classes or p.max() >= self.n_classes):
            raise ValueError(f"labels exceed the declared {self.n_classes} classes")
        n = self.n_classes
        self.counts += np.bincount(g * n + p, minlength=n * n).reshape(n, n)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Elementwise sum of two matrices (associative and commutative)."""
        if other.n_classes != self.n_classes:
            raise DimensionMismatch("cannot merge matrices of different sizes")
        return ConfusionMatrix(self.n_classes, self.counts + other.counts)

    def total(self) -> int:
        return int(self.counts.sum())

    def miou(self) -> MiouResult:
        """Per-class IoU and their arithmetic mean.

        Classes absent from both ground truth and prediction (zero union)
        are excluded from the mean rather than scored.
        """
        if self.total() == 0:
            raise EmptyMatrix("no evaluated pixels")
        inter = np.diag(self.counts).astype(np.float64)
        union = self.counts.sum(axis=0) + self.counts.sum(axis=1) - np.diag(self.counts)
        defined = union > 0
        per_class = {
            int(c): float(inter[c] / union[c]) for c in np.nonzero(defined)[0]
        }
        excluded = tuple(int(c) for c in np.nonzero(~defined)[0])
        mean = float(np.mean([per_class[c] for c in per_class]))
        return MiouResult(per_class=per_class, mean=mean, excluded=excluded)


def format_table(result: MiouResult, class_names: dict[int, str]) -> str:
    """Aligned text table of per-class IoU values plus the mean."""
    rows = [(class_names.get(cid, str(cid)), iou) for cid, iou in sorted(result.per_class.items())]
    width = max([len(name) for name, _ in rows] + [len("mean")])
    lines = [f"{name:<{width}}  {iou:7.4f}" for name, iou in rows]
    lines.append("-" * (width + 9))
    lines.append(f"{'mean':<{width}}  {result.mean:7.4f}")
    return "\n".join(lines)
