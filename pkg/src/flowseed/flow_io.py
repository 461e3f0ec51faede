"""Bit-exact file I/O for dense flow fields and single-channel rasters.

Flow fields use the Middlebury ``.flo`` layout: a little-endian float32
sanity value 202021.25, an int32 width, an int32 height, then ``height``
rows of ``width`` pixels, each pixel an interleaved (u, v) float32 pair.
Activation and saliency rasters are 8-bit grayscale images mapped to
[0, 1] by value/255; label rasters are palette images whose pixel values
are class indices, with 255 reserved as the ignore index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatch,
    MagicMismatch,
    NonFiniteFlow,
    TruncatedFile,
    UnsupportedFormat,
)

FLO_MAGIC = 202021.25
IGNORE_LABEL = 255
RASTER_KINDS = ("activation", "saliency", "label")

_FLO_HEADER = struct.Struct("<fii")


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement field between two frames.

    ``u`` holds horizontal displacements (positive = rightward), ``v``
    vertical ones (positive = downward); both are (height, width) float32
    arrays so file round-trips stay bit-exact. Values must be finite.
    Instances are treated as immutable and are safe to share.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.ascontiguousarray(self.u, dtype=np.float32)
        v = np.ascontiguousarray(self.v, dtype=np.float32)
        if u.ndim != 2 or v.ndim != 2 or u.shape != v.shape:
            raise DimensionMismatch(
                f"u and v must be 2-D with equal shapes, got {np.shape(self.u)} and {np.shape(self.v)}"
            )
        if u.shape[0] < 1 or u.shape[1] < 1:
            raise ValueError("flow fields must be at least 1x1")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise NonFiniteFlow("flow contains NaN or Inf values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(
            np.zeros((height, width), dtype=np.float32),
            np.zeros((height, width), dtype=np.float32),
        )


def read_flo(path: str | Path, *, nonfinite: str = "reject") -> FlowField:
    """Read a Middlebury ``.flo`` file.

    ``nonfinite`` controls what happens when the payload contains NaN/Inf:
    ``"reject"`` (default) raises :class:`NonFiniteFlow`, ``"zero"``
    replaces the offending values with 0. Trailing bytes beyond the
    declared payload are ignored.

    Raises:
        MagicMismatch: the sanity value is not 202021.25 (not a .flo file).
        TruncatedFile: header or payload is shorter than required.
        UnsupportedFormat: header declares non-positive dimensions.
    """
    if nonfinite not in ("reject", "zero"):
        raise ValueError(f"nonfinite must be 'reject' or 'zero', got {nonfinite!r}")
    data = Path(path).read_bytes()
    if len(data) < _FLO_HEADER.size:
        raise TruncatedFile(f"{path}: file shorter than the 12-byte header")
    magic, width, height = _FLO_HEADER.unpack_from(data)
    if magic != FLO_MAGIC:
        raise MagicMismatch(f"{path}: sanity value {magic!r} != {FLO_MAGIC}")
    if width < 1 or height < 1:
        raise UnsupportedFormat(f"{path}: implausible dimensions {width}x{height}")
    expected = 8 * width * height
    payload = data[_FLO_HEADER.size : _FLO_HEADER.size + expected]
    if len(payload) < expected:
        raise TruncatedFile(
            f"{path}: payload holds {len(payload)} bytes, header promises {expected}"
        )
    pairs = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2)
    u = pairs[..., 0]
    v = pairs[..., 1]
    finite = np.isfinite(pairs)
    if not finite.all():
        if nonfinite == "reject":
            bad = int((~finite).sum())
            raise NonFiniteFlow(f"{path}: {bad} non-finite flow components")
        u = np.where(finite[..., 0], u, np.float32(0.0))
        v = np.where(finite[..., 1], v, np.float32(0.0))
    return FlowField(u=u, v=v)


def write_flo(flow: FlowField, path: str | Path) -> None:
    """Write ``flow`` in the bit-exact ``.flo`` layout read by :func:`read_flo`."""
    pairs = np.empty((flow.height, flow.width, 2), dtype="<f4")
    pairs[..., 0] = flow.u
    pairs[..., 1] = flow.v
    with open(path, "wb") as fh:
        fh.write(_FLO_HEADER.pack(FLO_MAGIC, flow.width, flow.height))
        fh.write(pairs.tobytes())


@dataclass(frozen=True)
class Raster:
    """Single-channel image.

    Activation and saliency rasters hold real values in [0, 1]; label
    rasters hold integer class indices (0..254 plus 255 = ignore).
    """

    kind: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.kind not in RASTER_KINDS:
            raise UnsupportedFormat(f"unknown raster kind {self.kind!r}")
        if self.kind == "label":
            values = np.ascontiguousarray(self.values, dtype=np.uint8)
        else:
            values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise DimensionMismatch("rasters are non-empty single-channel 2-D arrays")
        if self.kind != "label":
            if not np.isfinite(values).all() or values.min() < 0.0 or values.max() > 1.0:
                raise ValueError(f"{self.kind} raster values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def read_raster(
    path: str | Path,
    kind: str,
    expected_size: tuple[int, int] | None = None,
) -> Raster:
    """Read a single-channel raster of the given kind.

    Activation/saliency files must be 8-bit grayscale and are mapped to
    [0, 1] by value/255; label files may be palette or 8-bit grayscale and
    their pixel values are taken verbatim as class indices. When
    ``expected_size`` (width, height) is given, a differing file raises
    :class:`DimensionMismatch`.
    """
    if kind not in RASTER_KINDS:
        raise UnsupportedFormat(f"unknown raster kind {kind!r}")
    with Image.open(path) as img:
        if kind == "label":
            if img.mode not in ("P", "L"):
                raise UnsupportedFormat(
                    f"{path}: label rasters must be palette or 8-bit grayscale, got mode {img.mode!r}"
                )
            values = np.asarray(img, dtype=np.uint8)
        else:
            if img.mode != "L":
                raise UnsupportedFormat(
                    f"{path}: {kind} rasters must be 8-bit grayscale, got mode {img.mode!r}"
                )
            values = np.asarray(img, dtype=np.float64) / 255.0
        size = img.size
    if expected_size is not None and size != tuple(expected_size):
        raise DimensionMismatch(
            f"{path}: expected {expected_size[0]}x{expected_size[1]}, got {size[0]}x{size[1]}"
        )
    return Raster(kind, values)


def write_raster(raster: Raster, path: str | Path) -> None:
    """Write a raster as a PNG file.

    Label rasters round-trip losslessly (indexed image, 255 = ignore);
    activation and saliency values are quantized to 1/255 steps.
    """
    if raster.kind == "label":
        img = Image.fromarray(raster.values)
        img.putpalette(label_palette())
    else:
        img = Image.fromarray(np.rint(raster.values * 255.0).astype(np.uint8))
    img.save(path, format="PNG")


def label_palette() -> list[int]:
    """256-entry flat RGB palette for label images.

    Colors follow the bit-coded scheme used by the common 21-class
    segmentation benchmarks; index 255 renders as the light void color.
    """
    palette: list[int] = []
    for index in range(256):
        r = g = b = 0
        c = index
        for bit in range(8):
            r |= ((c >> 0) & 1) << (7 - bit)
            g |= ((c >> 1) & 1) << (7 - bit)
            b |= ((c >> 2) & 1) << (7 - bit)
            c >>= 3
        palette.extend((r, g, b))
    return palette
