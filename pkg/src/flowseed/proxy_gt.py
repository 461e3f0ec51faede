"""Compose per-class aggregated masks and a saliency-derived background
mask into a single proxy ground-truth label map.

Per-pixel rules, in order: a pixel claimed by exactly one class gets that
class; a pixel claimed by several classes is resolved by the conflict
policy (ignore, or highest score); an unclaimed pixel that the saliency
map marks as background gets label 0; anything else is ignored. Foreground
claims always beat the background mask, and absence of activation is not
treated as evidence of background.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError, DimensionMismatch, MissingScores, UnsupportedFormat
from .flow_io import IGNORE_LABEL, Raster
from .warp_aggregate import ClassMask

CONFLICT_POLICIES = ("ignore", "priority-by-score")
BACKGROUND_CLASS = 0


@dataclass(frozen=True)
class BackgroundConfig:
    bg_threshold: float = 0.12
    conflict_policy: str = "ignore"

    def __post_init__(self) -> None:
        if not 0.0 <= self.bg_threshold <= 1.0:
            raise ConfigError(f"bg_threshold outside [0, 1]: {self.bg_threshold}")
        if self.conflict_policy not in CONFLICT_POLICIES:
            raise ConfigError(
                f"conflict_policy must be one of {CONFLICT_POLICIES}, got {self.conflict_policy!r}"
            )


@dataclass(frozen=True)
class ProxyLabelMap:
    """Per-pixel labels: 0 = background, 1..254 = classes, 255 = ignore."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.ndim != 2 or labels.size == 0:
            raise DimensionMismatch("label maps are non-empty 2-D arrays")
        object.__setattr__(self, "labels", labels)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


def background_mask(saliency: Raster, bg_threshold: float) -> ClassMask:
    """Pixels whose saliency is strictly below the threshold are background."""
    if saliency.kind == "label":
        raise UnsupportedFormat("background_mask needs a real-valued raster")
    return ClassMask(BACKGROUND_CLASS, saliency.values < bg_threshold)


def compose(
    agg: Mapping[int, ClassMask],
    bg: ClassMask,
    cfg: BackgroundConfig,
    tie_scores: Mapping[int, float] | None = None,
) -> ProxyLabelMap:
    """Merge per-class masks and the background mask into one label map.

    ``tie_scores`` (per-class scalars) is required for the
    ``priority-by-score`` policy; score ties break toward the smaller
    class id. Every pixel receives exactly one label.
    """
    shape = bg.mask.shape
    class_ids = sorted(agg)
    for cid in class_ids:
        if not 1 <= cid < IGNORE_LABEL:
            raise ValueError(f"class id {cid} outside the label alphabet 1..254")
        if agg[cid].mask.shape != shape:
            raise DimensionMismatch(
                f"class {cid} mask is {agg[cid].mask.shape}, background is {shape}"
            )
    labels = np.full(shape, IGNORE_LABEL, dtype=np.uint8)
    if class_ids:
        claims = np.stack([agg[cid].mask for cid in class_ids])
        counts = claims.sum(axis=0)
        ids = np.asarray(class_ids, dtype=np.uint8)
        single = counts == 1
        labels[single] = ids[np.argmax(claims, axis=0)][single]
        conflict = counts >= 2
        if conflict.any() and cfg.conflict_policy == "priority-by-score":
            if tie_scores is None:
                raise MissingScores("priority-by-score needs tie_scores")
            missing = [cid for cid in class_ids if cid not in tie_scores]
            if missing:
                raise MissingScores(f"tie_scores missing classes {missing}")
            scores = np.asarray([tie_scores[cid] for cid in class_ids], dtype=np.float64)
            ranked = np.where(claims, scores[:, None, None], -np.inf)
            labels[conflict] = ids[np.argmax(ranked, axis=0)][conflict]
        unclaimed = counts == 0
    else:
        unclaimed = np.ones(shape, dtype=bool)
    labels[unclaimed & bg.mask] = BACKGROUND_CLASS
    return ProxyLabelMap(labels)
