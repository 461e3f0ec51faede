"""Fuse activation maps inferred from transformed copies of a frame.

A classifier may be run on flipped and/or rescaled copies of the same
frame, each run yielding one per-class activation map in the transformed
geometry. Maps are brought back to the reference geometry (un-flip by
mirroring columns, un-scale by bilinear resampling) and fused by taking
the per-pixel maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ClassMismatch, DimensionMismatch, EmptyInput
from .flow_io import read_raster


@dataclass(frozen=True)
class TransformTag:
    """Input transform a map was inferred under: horizontal flip and/or scale."""

    flip: bool = False
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class ActivationMap:
    """Per-class real-valued localization map with values in [0, 1]."""

    class_id: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise DimensionMismatch("activation maps are non-empty 2-D arrays")
        if not np.isfinite(values).all() or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("activation values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def scaled_size(ref_w: int, ref_h: int, scale: float) -> tuple[int, int]:
    """Per-axis round-half-up dimensions of a reference frame under ``scale``."""
    return (
        max(1, int(math.floor(ref_w * scale + 0.5))),
        max(1, int(math.floor(ref_h * scale + 0.5))),
    )


def resize_bilinear(values: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resampling to (out_h, out_w) with pixel-center alignment.

    Sample coordinates are clamped to the source grid, so constant inputs
    stay constant and outputs never leave the input value range.
    """
    in_h, in_w = values.shape
    if (in_w, in_h) == (out_w, out_h):
        return values.copy()
    sx = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    sy = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = sx - x0
    fy = sy - y0
    v00 = values[np.ix_(y0, x0)]
    v01 = values[np.ix_(y0, x1)]
    v10 = values[np.ix_(y1, x0)]
    v11 = values[np.ix_(y1, x1)]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    out = top * (1.0 - fy)[:, None] + bot * fy[:, None]
    return np.clip(out, 0.0, 1.0)


def apply_transform(amap: ActivationMap, tag: TransformTag) -> ActivationMap:
    """Apply ``tag`` to a reference-geometry map (flip, then rescale).

    This is the forward direction used to fabricate transformed inputs;
    :func:`inverse_transform` undoes it.
    """
    values = amap.values
    if tag.flip:
        values = values[:, ::-1]
    out_w, out_h = scaled_size(amap.width, amap.height, tag.scale)
    values = resize_bilinear(values, out_w, out_h)
    return ActivationMap(amap.class_id, values)


def inverse_transform(
    amap: ActivationMap, tag: TransformTag, ref_w: int, ref_h: int
) -> ActivationMap:
    """Map an activation map back to the reference frame geometry.

    Un-flips by mirroring columns, then un-scales by bilinear resampling to
    (ref_w, ref_h). The input must have the dimensions the tag implies for
    the reference size, otherwise :class:`DimensionMismatch` is raised.
    """
    exp_w, exp_h = scaled_size(ref_w, ref_h, tag.scale)
    if (amap.width, amap.height) != (exp_w, exp_h):
        raise DimensionMismatch(
            f"map is {amap.width}x{amap.height}, tag scale {tag.scale} over "
            f"{ref_w}x{ref_h} implies {exp_w}x{exp_h}"
        )
    values = amap.values
    if tag.flip:
        values = values[:, ::-1]
    values = resize_bilinear(values, ref_w, ref_h)
    return ActivationMap(amap.class_id, values)


def fuse_max(maps: Sequence[ActivationMap]) -> ActivationMap:
    """Per-pixel maximum of same-class, same-size activation maps."""
    if not maps:
        raise EmptyInput("fuse_max needs at least one map")
    first = maps[0]
    for m in maps[1:]:
        if m.class_id != first.class_id:
            raise ClassMismatch(f"cannot fuse classes {first.class_id} and {m.class_id}")
        if m.values.shape != first.values.shape:
            raise DimensionMismatch(
                f"cannot fuse shapes {first.values.shape} and {m.values.shape}"
            )
    fused = np.maximum.reduce([m.values for m in maps])
    return ActivationMap(first.class_id, fused)


@dataclass(frozen=True)
class FusionEntry:
    """One manifest row: a raster holding the map for (class, transform)."""

    class_id: int
    tag: TransformTag
    raster_path: str


def fusion_entry_from_dict(entry: dict) -> FusionEntry:
    return FusionEntry(
        class_id=int(entry["class_id"]),
        tag=TransformTag(flip=bool(entry.get("flip", False)), scale=float(entry.get("scale", 1.0))),
        raster_path=str(entry["raster_path"]),
    )


def fuse_frame(
    entries: Sequence[FusionEntry],
    ref_w: int,
    ref_h: int,
    base_dir: str | Path,
) -> dict[int, ActivationMap]:
    """Load, inverse-transform, and fuse one frame's manifest entries.

    Returns one fused reference-geometry map per class id present.
    """
    base = Path(base_dir)
    per_class: dict[int, list[ActivationMap]] = {}
    for entry in entries:
        exp_w, exp_h = scaled_size(ref_w, ref_h, entry.tag.scale)
        raster = read_raster(base / entry.raster_path, "activation", expected_size=(exp_w, exp_h))
        amap = ActivationMap(entry.class_id, raster.values)
        per_class.setdefault(entry.class_id, []).append(
            inverse_transform(amap, entry.tag, ref_w, ref_h)
        )
    return {cid: fuse_max(maps) for cid, maps in sorted(per_class.items())}
