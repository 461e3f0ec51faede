"""Threshold activation maps into masks and union them across frames by
incremental flow warping.

The aggregation folds a frame sequence left to right: the running mask is
warped into the next frame along the pairwise flow field, re-binarized,
and OR-ed with that frame's own mask, so the final frame ends up holding
the union of every frame's activated regions in its own coordinates.

Two warp modes are provided. ``forward-splat`` scatters each source pixel
bilinearly around its displaced target location and is the default: the
flow is defined on the source frame, so occupancy follows the motion of
the pixels that carry it. ``backward-sample`` gathers a bilinear sample
from (p - flow(p)) per target pixel; it is cheaper but evaluates the flow
at target coordinates, which is only faithful where the flow is locally
smooth. In both modes coordinates outside the image contribute or receive
nothing (zero padding); border clamping would fabricate foreground at the
image edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cam_fusion import ActivationMap
from .errors import ClassMismatch, ConfigError, DimensionMismatch, EmptyInput, LengthMismatch
from .flow_io import FlowField

WARP_MODES = ("forward-splat", "backward-sample")


@dataclass(frozen=True)
class ClassMask:
    """Binary per-class occupancy mask, stored as a (height, width) bool array."""

    class_id: int
    mask: np.ndarray

    def __post_init__(self) -> None:
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.size == 0:
            raise DimensionMismatch("masks are non-empty 2-D arrays")
        object.__setattr__(self, "mask", mask)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class SoftMask:
    """Real-valued occupancy in [0, 1], the intermediate result of warping."""

    class_id: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise DimensionMismatch("soft masks are non-empty 2-D arrays")
        if not np.isfinite(values).all() or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("soft mask values must lie in [0, 1]")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class AggregateConfig:
    """Thresholds and warp mode for mask aggregation.

    ``fg_threshold`` binarizes activation maps (inclusive: value >=
    threshold is foreground). ``binarize_threshold`` re-binarizes warped
    soft masks so the union stays a set union. Out-of-frame flow targets
    always drop their weight.
    """

    fg_threshold: float = 0.2
    warp_mode: str = "forward-splat"
    binarize_threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.fg_threshold <= 1.0:
            raise ConfigError(f"fg_threshold outside [0, 1]: {self.fg_threshold}")
        if self.warp_mode not in WARP_MODES:
            raise ConfigError(f"warp_mode must be one of {WARP_MODES}, got {self.warp_mode!r}")
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ConfigError(
                f"binarize_threshold outside (0, 1): {self.binarize_threshold}"
            )


def threshold_mask(amap: ActivationMap, fg_threshold: float) -> ClassMask:
    """Binarize an activation map: foreground where value >= fg_threshold."""
    return ClassMask(amap.class_id, amap.values >= fg_threshold)


def _forward_splat(mask: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    height, width = mask.shape
    out = np.zeros((height, width), dtype=np.float64)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return out
    tx = xs + u[ys, xs].astype(np.float64)
    ty = ys + v[ys, xs].astype(np.float64)
    x0 = np.floor(tx)
    y0 = np.floor(ty)
    fx = tx - x0
    fy = ty - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    corners = (
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    )
    for cx, cy, weight in corners:
        ok = (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
        np.add.at(out, (cy[ok], cx[ok]), weight[ok])
    return np.minimum(out, 1.0)


def _backward_sample(mask: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    height, width = mask.shape
    gy, gx = np.mgrid[0:height, 0:width]
    sx = gx - u.astype(np.float64)
    sy = gy - v.astype(np.float64)
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    src = mask.astype(np.float64)
    out = np.zeros((height, width), dtype=np.float64)
    corners = (
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    )
    for cx, cy, weight in corners:
        ok = (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
        out[ok] += weight[ok] * src[cy[ok], cx[ok]]
    return np.clip(out, 0.0, 1.0)


def warp(mask: ClassMask, flow: FlowField, cfg: AggregateConfig) -> SoftMask:
    """Warp a binary mask along a flow field with bilinear interpolation.

    Returns a soft occupancy map in the target frame's coordinates; see the
    module docstring for the two modes' semantics.
    """
    if (flow.height, flow.width) != mask.mask.shape:
        raise DimensionMismatch(
            f"mask is {mask.width}x{mask.height}, flow is {flow.width}x{flow.height}"
        )
    if cfg.warp_mode == "forward-splat":
        values = _forward_splat(mask.mask, flow.u, flow.v)
    else:
        values = _backward_sample(mask.mask, flow.u, flow.v)
    return SoftMask(mask.class_id, values)


def union_step(
    prev_agg: ClassMask,
    flow_to_next: FlowField,
    cur: ClassMask,
    cfg: AggregateConfig,
) -> ClassMask:
    """One aggregation step: warp the running mask forward and OR it in.

    The warped soft mask is re-binarized at ``cfg.binarize_threshold``
    (inclusive) before the union, keeping the result binary.
    """
    if prev_agg.class_id != cur.class_id:
        raise ClassMismatch(
            f"cannot union classes {prev_agg.class_id} and {cur.class_id}"
        )
    if prev_agg.mask.shape != cur.mask.shape:
        raise DimensionMismatch(
            f"mask shapes differ: {prev_agg.mask.shape} vs {cur.mask.shape}"
        )
    warped = warp(prev_agg, flow_to_next, cfg)
    carried = warped.values >= cfg.binarize_threshold
    return ClassMask(cur.class_id, cur.mask | carried)


def aggregate_sequence(
    masks: Sequence[ClassMask],
    flows: Sequence[FlowField],
    cfg: AggregateConfig,
) -> ClassMask:
    """Fold a frame sequence into the final frame's aggregated mask.

    ``flows[i]`` must map frame i to frame i+1, so exactly len(masks) - 1
    flow fields are required. The single-mask case returns that mask.
    """
    if not masks:
        raise EmptyInput("aggregate_sequence needs at least one mask")
    if len(flows) != len(masks) - 1:
        raise LengthMismatch(
            f"{len(masks)} masks need {len(masks) - 1} flows, got {len(flows)}"
        )
    agg = masks[0]
    for flow, cur in zip(flows, masks[1:]):
        agg = union_step(agg, flow, cur, cfg)
    return agg


def aggregate_multiclass(
    masks_by_class: Mapping[int, Sequence[ClassMask]],
    flows: Sequence[FlowField],
    cfg: AggregateConfig,
) -> dict[int, ClassMask]:
    """Aggregate each class independently over the shared frame sequence."""
    result: dict[int, ClassMask] = {}
    for class_id in sorted(masks_by_class):
        masks = masks_by_class[class_id]
        for m in masks:
            if m.class_id != class_id:
                raise ClassMismatch(
                    f"mask for class {m.class_id} filed under class {class_id}"
                )
        result[class_id] = aggregate_sequence(masks, flows, cfg)
    return result
