"""End-to-end data path over a dataset manifest.

For each video: infer per-frame labels from classifier scores, select one
qualifying window, fuse that window's activation maps per class, aggregate
them across the window by incremental warping, compose the proxy label
map, and write it with a sidecar. Per-video failures are recorded and the
run continues (web-scale inputs are dirty); malformed configuration and
manifests abort instead.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .cam_fusion import FusionEntry, fuse_frame, fusion_entry_from_dict
from .errors import ConfigError, FlowseedError
from .flow_io import Raster, read_flo, read_raster, write_raster
from .proxy_gt import BackgroundConfig, background_mask, compose
from .temporal_filter import (
    PICK_POLICIES,
    FilterConfig,
    class_index_map,
    infer_labels,
    load_class_names,
    load_score_file,
    pick_one_window,
    select_windows,
)
from .warp_aggregate import AggregateConfig, aggregate_multiclass, threshold_mask

STAGES = ("filter", "fuse", "aggregate", "compose", "write")


@dataclass(frozen=True)
class PipelineConfig:
    """All thresholds and policies of the data path, with their defaults."""

    score_threshold: float = 0.9
    window_size: int = 5
    fg_threshold: float = 0.2
    bg_threshold: float = 0.12
    binarize_threshold: float = 0.5
    warp_mode: str = "forward-splat"
    window_policy: str = "first"
    conflict_policy: str = "ignore"
    workers: int = 1

    def __post_init__(self) -> None:
        # reuse the per-stage validations
        FilterConfig(score_threshold=self.score_threshold, window_size=self.window_size)
        self.aggregate_config()
        self.background_config()
        if self.window_policy not in PICK_POLICIES:
            raise ConfigError(
                f"window_policy must be one of {PICK_POLICIES}, got {self.window_policy!r}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def aggregate_config(self) -> AggregateConfig:
        return AggregateConfig(
            fg_threshold=self.fg_threshold,
            warp_mode=self.warp_mode,
            binarize_threshold=self.binarize_threshold,
        )

    def background_config(self) -> BackgroundConfig:
        return BackgroundConfig(
            bg_threshold=self.bg_threshold, conflict_policy=self.conflict_policy
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)


@dataclass(frozen=True)
class FrameInputs:
    frame_id: int
    cams: tuple[FusionEntry, ...]
    saliency: str | None = None
    flow_to_next: str | None = None


@dataclass(frozen=True)
class VideoInputs:
    video_id: str
    width: int
    height: int
    scores: str
    frames: tuple[FrameInputs, ...]


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed dataset manifest; all paths are relative to ``root``."""

    root: Path
    classes: str
    videos: tuple[VideoInputs, ...]


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and structurally validate a dataset manifest.

    Shape: {"classes": path, "videos": [{video_id, width, height, scores,
    frames: [{frame_id, cams: [entry...], saliency, flow_to_next?}]}]}.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load manifest {path}: {exc}") from exc
    try:
        videos = []
        for v in doc["videos"]:
            frames = tuple(
                FrameInputs(
                    frame_id=int(f["frame_id"]),
                    cams=tuple(fusion_entry_from_dict(e) for e in f.get("cams", [])),
                    saliency=f.get("saliency"),
                    flow_to_next=f.get("flow_to_next"),
                )
                for f in v["frames"]
            )
            videos.append(
                VideoInputs(
                    video_id=str(v["video_id"]),
                    width=int(v["width"]),
                    height=int(v["height"]),
                    scores=str(v["scores"]),
                    frames=frames,
                )
            )
        return DatasetManifest(
            root=path.parent, classes=str(doc["classes"]), videos=tuple(videos)
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed manifest ({exc})") from exc


@dataclass
class RunReport:
    counts: dict
    videos: list
    config: dict
    stage_seconds: dict

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "videos": self.videos,
            "config": self.config,
            "stage_seconds": self.stage_seconds,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _process_video(
    video: VideoInputs,
    name_to_index: dict[str, int],
    config: PipelineConfig,
    root: Path,
    labels_dir: Path,
) -> tuple[dict, dict[str, float]]:
    times = dict.fromkeys(STAGES, 0.0)
    result: dict = {"video_id": video.video_id, "windows": 0}

    t0 = time.perf_counter()
    scores = load_score_file(root / video.scores, name_to_index)
    if [f.frame_id for f in scores.frames] != [f.frame_id for f in video.frames]:
        raise ConfigError(f"{video.video_id}: score frames do not match manifest frames")
    label_sets = [infer_labels(sv, config.score_threshold) for sv in scores.frames]
    fcfg = FilterConfig(
        score_threshold=config.score_threshold,
        window_size=config.window_size,
        search_class=scores.search_class,
    )
    windows = select_windows(label_sets, fcfg)
    times["filter"] += time.perf_counter() - t0
    result["windows"] = len(windows)
    if not windows:
        result["status"] = "filtered_out"
        return result, times
    window = pick_one_window(windows, config.window_policy)
    assert window is not None
    span = list(range(window.start, window.start + config.window_size))
    class_ids = sorted(window.labels)

    t0 = time.perf_counter()
    masks_by_class: dict[int, list] = {cid: [] for cid in class_ids}
    for fi in span:
        frame = video.frames[fi]
        entries = [e for e in frame.cams if e.class_id in window.labels]
        fused = fuse_frame(entries, video.width, video.height, root)
        missing = sorted(window.labels - fused.keys())
        if missing:
            raise ConfigError(
                f"{video.video_id}: frame {frame.frame_id} lacks maps for classes {missing}"
            )
        for cid in class_ids:
            masks_by_class[cid].append(threshold_mask(fused[cid], config.fg_threshold))
    times["fuse"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    flows = []
    for fi in span[:-1]:
        frame = video.frames[fi]
        if frame.flow_to_next is None:
            raise ConfigError(
                f"{video.video_id}: frame {frame.frame_id} has no flow to its successor"
            )
        flows.append(read_flo(root / frame.flow_to_next))
    agg = aggregate_multiclass(masks_by_class, flows, config.aggregate_config())
    times["aggregate"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    final = video.frames[span[-1]]
    if final.saliency is None:
        raise ConfigError(f"{video.video_id}: final window frame has no saliency map")
    sal = read_raster(root / final.saliency, "saliency", expected_size=(video.width, video.height))
    tie_scores = None
    if config.conflict_policy == "priority-by-score":
        final_scores = scores.frames[span[-1]].scores
        tie_scores = {cid: float(final_scores.get(cid, 0.0)) for cid in class_ids}
    label_map = compose(
        agg, background_mask(sal, config.bg_threshold), config.background_config(), tie_scores
    )
    times["compose"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    label_path = labels_dir / f"{video.video_id}.png"
    write_raster(Raster("label", label_map.labels), label_path)
    sidecar = {
        "video_id": video.video_id,
        "window_start": video.frames[window.start].frame_id,
        "label_set": class_ids,
        "config": config.to_dict(),
    }
    sidecar_path = labels_dir / f"{video.video_id}.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    times["write"] += time.perf_counter() - t0

    result["status"] = "kept"
    result["window_start"] = video.frames[window.start].frame_id
    result["label_set"] = class_ids
    result["outputs"] = {"label": f"labels/{video.video_id}.png", "sidecar": f"labels/{video.video_id}.json"}
    return result, times


def _process_video_safe(
    video: VideoInputs,
    name_to_index: dict[str, int],
    config: PipelineConfig,
    root: Path,
    labels_dir: Path,
) -> tuple[dict, dict[str, float]]:
    try:
        return _process_video(video, name_to_index, config, root, labels_dir)
    except (FlowseedError, OSError) as exc:
        return (
            {
                "video_id": video.video_id,
                "status": "error",
                "windows": 0,
                "error": f"{type(exc).__name__}: {exc}",
            },
            dict.fromkeys(STAGES, 0.0),
        )


def run_pipeline(
    manifest: DatasetManifest | str | Path,
    out_dir: str | Path,
    config: PipelineConfig | None = None,
) -> RunReport:
    """Run the full data path and write labels plus report.json to out_dir.

    Videos are independent; with ``config.workers > 1`` they are processed
    by a thread pool. Outputs are deterministic for identical inputs and
    config (stage timings aside).
    """
    if config is None:
        config = PipelineConfig()
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    class_names = load_class_names(manifest.root / manifest.classes)
    name_to_index = class_index_map(class_names)
    out = Path(out_dir)
    labels_dir = out / "labels"
    labels_dir.mkdir(parents=True, exist_ok=True)

    args = [(v, name_to_index, config, manifest.root, labels_dir) for v in manifest.videos]
    if config.workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(lambda a: _process_video_safe(*a), args))
    else:
        outcomes = [_process_video_safe(*a) for a in args]

    videos = [r for r, _ in outcomes]
    stage_seconds = {
        stage: float(np.sum([t[stage] for _, t in outcomes])) if outcomes else 0.0
        for stage in STAGES
    }
    kept = sum(1 for r in videos if r["status"] == "kept")
    counts = {
        "videos_in": len(videos),
        "videos_kept": kept,
        "windows": sum(r.get("windows", 0) for r in videos),
        "frames_emitted": kept,
        "errors": sum(1 for r in videos if r["status"] == "error"),
    }
    report = RunReport(
        counts=counts, videos=videos, config=config.to_dict(), stage_seconds=stage_seconds
    )
    report.write(out / "report.json")
    return report


# ---------------------------------------------------------------------------
# Standalone aggregation manifests (the `aggregate` subcommand surface)


@dataclass(frozen=True)
class AggregateManifest:
    root: Path
    width: int
    height: int
    classes: tuple[int, ...]
    frames: tuple[dict[int, str], ...]
    flows: tuple[str, ...]


def load_aggregate_manifest(path: str | Path) -> AggregateManifest:
    """Load a manifest listing per-frame activation rasters per class and
    the pairwise flow files: {"width", "height", "classes", "frames":
    [{"frame_id", "activations": {class: path}}], "flows": [path...]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load manifest {path}: {exc}") from exc
    try:
        frames = []
        for f in sorted(doc["frames"], key=lambda f: int(f["frame_id"])):
            frames.append({int(c): str(p) for c, p in f["activations"].items()})
        return AggregateManifest(
            root=path.parent,
            width=int(doc["width"]),
            height=int(doc["height"]),
            classes=tuple(int(c) for c in doc["classes"]),
            frames=tuple(frames),
            flows=tuple(str(p) for p in doc["flows"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed manifest ({exc})") from exc
