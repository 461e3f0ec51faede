"""Command-line entry points.

Subcommands mirror the library stages: ``filter``, ``fuse``, ``aggregate``,
``compose``, ``eval``, ``synth``, and the end-to-end ``pipeline``. Exit
codes: 0 on success, 1 on configuration errors, 2 when a pipeline run
processed zero videos.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from .cam_fusion import ActivationMap, fuse_frame, fusion_entry_from_dict
from .errors import ConfigError, FlowseedError, InvalidSpec
from .evaluation import ConfusionMatrix, format_table
from .flow_io import Raster, read_flo, read_raster, write_raster
from .pipeline import PipelineConfig, load_aggregate_manifest, run_pipeline
from .proxy_gt import background_mask, compose
from .synth import build_dataset, dataset_from_dict, render, scene_spec_from_dict, write_scene
from .temporal_filter import (
    FilterConfig,
    class_index_map,
    infer_labels,
    load_class_names,
    load_score_file,
    pick_one_window,
    select_windows,
)
from .warp_aggregate import ClassMask, aggregate_multiclass, threshold_mask


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    base = PipelineConfig.from_file(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {
        name: getattr(args, name)
        for name in (
            "score_threshold",
            "window_size",
            "fg_threshold",
            "bg_threshold",
            "binarize_threshold",
            "warp_mode",
            "window_policy",
            "conflict_policy",
            "workers",
        )
        if getattr(args, name, None) is not None
    }
    merged = {**base.to_dict(), **overrides}
    return PipelineConfig.from_dict(merged)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags below override it")
    parser.add_argument("--score-threshold", dest="score_threshold", type=float)
    parser.add_argument("--window-size", dest="window_size", type=int)
    parser.add_argument("--fg-threshold", dest="fg_threshold", type=float)
    parser.add_argument("--bg-threshold", dest="bg_threshold", type=float)
    parser.add_argument("--binarize-threshold", dest="binarize_threshold", type=float)
    parser.add_argument("--warp-mode", dest="warp_mode", choices=("forward-splat", "backward-sample"))
    parser.add_argument("--window-policy", dest="window_policy", choices=("first", "longest-run-center"))
    parser.add_argument("--conflict-policy", dest="conflict_policy", choices=("ignore", "priority-by-score"))
    parser.add_argument("--workers", type=int)


def _cmd_filter(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    names = load_class_names(args.classes)
    name_to_index = class_index_map(names)
    index_to_name = {i: n for n, i in name_to_index.items()}
    report = {"videos": []}
    for path in args.scores:
        video = load_score_file(path, name_to_index)
        label_sets = [infer_labels(sv, config.score_threshold) for sv in video.frames]
        fcfg = FilterConfig(
            score_threshold=config.score_threshold,
            window_size=config.window_size,
            search_class=video.search_class,
        )
        windows = select_windows(label_sets, fcfg, overlap=args.overlap)
        picked = pick_one_window(windows, config.window_policy)
        first_id = video.frames[0].frame_id if video.frames else 0

        def _doc(w):
            return {
                "start": first_id + w.start,
                "labels": sorted(index_to_name[c] for c in w.labels),
            }

        report["videos"].append(
            {
                "video_id": video.video_id,
                "search_class": index_to_name[video.search_class],
                "windows": [_doc(w) for w in windows],
                "picked": _doc(picked) if picked else None,
            }
        )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    path = Path(args.manifest)
    try:
        doc = json.loads(path.read_text())
        width, height = int(doc["width"]), int(doc["height"])
        frames = [
            (int(f["frame_id"]), [fusion_entry_from_dict(e) for e in f["entries"]])
            for f in doc["frames"]
        ]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed fusion manifest ({exc})") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for frame_id, entries in frames:
        fused = fuse_frame(entries, width, height, path.parent)
        for cid, amap in fused.items():
            write_raster(Raster("activation", amap.values), out / f"fused_f{frame_id:03d}_c{cid}.png")
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    manifest = load_aggregate_manifest(args.manifest)
    masks_by_class: dict[int, list[ClassMask]] = {cid: [] for cid in manifest.classes}
    for per_frame in manifest.frames:
        for cid in manifest.classes:
            if cid not in per_frame:
                raise ConfigError(f"manifest frame lacks class {cid}")
            raster = read_raster(
                manifest.root / per_frame[cid], "activation",
                expected_size=(manifest.width, manifest.height),
            )
            masks_by_class[cid].append(
                threshold_mask(ActivationMap(cid, raster.values), config.fg_threshold)
            )
    flows = [read_flo(manifest.root / p) for p in manifest.flows]
    agg = aggregate_multiclass(masks_by_class, flows, config.aggregate_config())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cid, mask in agg.items():
        write_raster(Raster("activation", mask.mask.astype(np.float64)), out / f"class_{cid}.png")
    return 0


def _cmd_compose(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    agg_dir = Path(args.agg_dir)
    masks = {}
    for path in sorted(agg_dir.glob("class_*.png")):
        match = re.fullmatch(r"class_(\d+)\.png", path.name)
        if not match:
            continue
        cid = int(match.group(1))
        raster = read_raster(path, "activation")
        masks[cid] = ClassMask(cid, raster.values >= 0.5)
    if not masks:
        raise ConfigError(f"no class_*.png masks found in {agg_dir}")
    saliency = read_raster(args.saliency, "saliency")
    tie_scores = None
    if args.scores:
        doc = json.loads(Path(args.scores).read_text())
        tie_scores = {int(c): float(s) for c, s in doc.items()}
    label_map = compose(
        masks, background_mask(saliency, config.bg_threshold), config.background_config(), tie_scores
    )
    write_raster(Raster("label", label_map.labels), args.out)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    names = load_class_names(args.classes)
    n_classes = len(names) + 1  # plus background
    index_to_name = {0: "background", **{i + 1: n for i, n in enumerate(names)}}
    gt_dir, pred_dir = Path(args.gt), Path(args.pred)
    gt_files = sorted(gt_dir.glob("*.png"))
    if not gt_files:
        raise ConfigError(f"no .png label maps in {gt_dir}")
    missing = [p.name for p in gt_files if not (pred_dir / p.name).exists()]
    if missing:
        raise ConfigError(f"predictions missing for: {missing}")
    cm = ConfusionMatrix(n_classes)
    for gt_path in gt_files:
        gt = read_raster(gt_path, "label").values
        pred = read_raster(pred_dir / gt_path.name, "label").values
        cm.accumulate(gt, pred)
    result = cm.miou()
    table = format_table(result, index_to_name)
    print(table)
    if args.out:
        report = {
            "per_class": {index_to_name.get(c, str(c)): iou for c, iou in result.per_class.items()},
            "mean": result.mean,
            "excluded_classes": [index_to_name.get(c, str(c)) for c in result.excluded],
            "images": len(gt_files),
        }
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    path = Path(args.spec)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load spec {path}: {exc}") from exc
    if "videos" in doc or "random" in doc:
        class_names, videos = dataset_from_dict(doc)
        manifest = build_dataset(class_names, videos, args.out)
    elif "objects" in doc:
        manifest = write_scene(render(scene_spec_from_dict(doc)), args.out)
    else:
        raise ConfigError(f"{path}: spec needs either 'objects' (scene) or 'videos'/'random' (dataset)")
    print(manifest)
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = run_pipeline(args.manifest, args.out, config)
    print(json.dumps(report.counts, indent=2, sort_keys=True))
    counts = report.counts
    if counts["videos_in"] > 0 and counts["videos_in"] == counts["errors"]:
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowseed",
        description="Proxy segmentation ground truth from frame scores, activation maps, flow, and saliency.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="infer labels and select frame windows")
    p.add_argument("--scores", nargs="+", required=True, help="per-video score JSON files")
    p.add_argument("--classes", required=True, help="class names file, one per line")
    p.add_argument("--overlap", choices=("all", "disjoint"), default="all")
    p.add_argument("--out", help="report path (stdout when omitted)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("fuse", help="inverse-transform and max-fuse activation maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("aggregate", help="threshold and union masks across frames by warping")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("compose", help="merge class masks and saliency into a label map")
    p.add_argument("--agg-dir", required=True, help="directory holding class_<id>.png masks")
    p.add_argument("--saliency", required=True)
    p.add_argument("--out", required=True, help="output label PNG")
    p.add_argument("--scores", help="JSON {class_id: score} for priority-by-score")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("eval", help="mean IoU of predicted vs reference label maps")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic scene or dataset corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pipeline", help="run the full data path over a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (ConfigError, InvalidSpec) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FlowseedError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
