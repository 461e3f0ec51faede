"""Proxy segmentation ground truth from web-video frame sequences.

The library turns per-frame classifier scores, per-class activation maps,
pairwise optical flow, and saliency maps into one proxy label map per
selected frame window: frames are filtered by their inferred label sets,
activation maps from transformed inputs are max-fused, masks are unioned
across the window by incremental flow warping, and the result is composed
with a saliency-derived background into an indexed label image. An mIoU
harness evaluates the outputs.
"""

from .cam_fusion import (
    ActivationMap,
    TransformTag,
    apply_transform,
    fuse_max,
    inverse_transform,
)
from .errors import FlowseedError
from .evaluation import ConfusionMatrix, MiouResult
from .flow_io import (
    IGNORE_LABEL,
    FlowField,
    Raster,
    read_flo,
    read_raster,
    write_flo,
    write_raster,
)
from .pipeline import PipelineConfig, RunReport, run_pipeline
from .proxy_gt import BackgroundConfig, ProxyLabelMap, background_mask, compose
from .synth import SceneSpec, analytic_union, random_scene, render
from .temporal_filter import (
    FilterConfig,
    ScoreVector,
    Window,
    infer_labels,
    pick_one_window,
    select_windows,
)
from .warp_aggregate import (
    AggregateConfig,
    ClassMask,
    SoftMask,
    aggregate_multiclass,
    aggregate_sequence,
    threshold_mask,
    union_step,
    warp,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationMap",
    "AggregateConfig",
    "BackgroundConfig",
    "ClassMask",
    "ConfusionMatrix",
    "FilterConfig",
    "FlowField",
    "FlowseedError",
    "IGNORE_LABEL",
    "MiouResult",
    "PipelineConfig",
    "ProxyLabelMap",
    "Raster",
    "RunReport",
    "SceneSpec",
    "ScoreVector",
    "SoftMask",
    "TransformTag",
    "Window",
    "aggregate_multiclass",
    "aggregate_sequence",
    "analytic_union",
    "apply_transform",
    "background_mask",
    "compose",
    "fuse_max",
    "infer_labels",
    "inverse_transform",
    "pick_one_window",
    "random_scene",
    "read_flo",
    "read_raster",
    "render",
    "run_pipeline",
    "select_windows",
    "threshold_mask",
    "union_step",
    "warp",
    "write_flo",
    "write_raster",
]
