"""Deterministic synthetic scenes with analytically known geometry.

A scene is one or more rigidly translating shapes. Each frame activates a
vertical slice of each object (a configurable fraction of its footprint),
the flow fields are the exact per-object displacements painted over the
object body (optionally plus Gaussian noise), and the analytic union
transports every frame's slice into the final frame by pure geometry.
That union is the ground truth the warp-based aggregation is checked
against: for integer velocities and zero noise the two must agree
pixel-for-pixel.

Objects of different classes are laid out by the random generators in
disjoint horizontal bands; overlapping objects are not rejected, but the
flow painting then follows object order and exactness is no longer
guaranteed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cam_fusion import ActivationMap
from .errors import InvalidSpec
from .flow_io import FlowField, Raster, write_flo, write_raster
from .warp_aggregate import ClassMask

SHAPES = ("rectangle", "disk")
SLICE_PATTERNS = ("rotating", "random")


@dataclass(frozen=True)
class ObjectSpec:
    """One rigidly translating shape.

    ``center`` is the footprint center at the first frame, ``size`` the
    full (width, height) extent, ``velocity`` the per-frame translation in
    pixels. A disk is the ellipse inscribed in that extent.
    """

    class_id: int
    center: tuple[float, float]
    size: tuple[float, float]
    shape: str = "rectangle"
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not 1 <= self.class_id <= 254:
            raise InvalidSpec(f"class_id must be in 1..254, got {self.class_id}")
        if self.shape not in SHAPES:
            raise InvalidSpec(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise InvalidSpec(f"size must be positive, got {self.size}")


@dataclass(frozen=True)
class ActivationModel:
    """Which fraction of each object a frame activates, and in what order.

    ``coverage`` is rounded to 1/n for the nearest slice count n;
    ``rotating`` cycles through the n slices frame by frame, ``random``
    draws a slice per frame from the scene's seeded generator.
    """

    coverage: float = 1.0
    pattern: str = "rotating"

    def __post_init__(self) -> None:
        if not 0.0 < self.coverage <= 1.0:
            raise InvalidSpec(f"coverage must be in (0, 1], got {self.coverage}")
        if self.pattern not in SLICE_PATTERNS:
            raise InvalidSpec(f"pattern must be one of {SLICE_PATTERNS}, got {self.pattern!r}")


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int
    height: int
    frames: int
    objects: tuple[ObjectSpec, ...]
    activation: ActivationModel = field(default_factory=ActivationModel)
    flow_noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.width < 1 or self.height < 1:
            raise InvalidSpec(f"frame size must be positive, got {self.width}x{self.height}")
        if self.frames < 1:
            raise InvalidSpec(f"need at least one frame, got {self.frames}")
        if not self.objects:
            raise InvalidSpec("scene needs at least one object")
        if self.flow_noise_sigma < 0:
            raise InvalidSpec(f"flow_noise_sigma must be >= 0, got {self.flow_noise_sigma}")


@dataclass(frozen=True)
class SceneRender:
    """Rendered frames plus the analytic ground truth at the final frame."""

    spec: SceneSpec
    activations: tuple[dict[int, ActivationMap], ...]
    flows: tuple[FlowField, ...]
    saliency: tuple[Raster, ...]
    oracle_union: dict[int, ClassMask]
    full_object_mask: dict[int, ClassMask]


def slice_count(coverage: float) -> int:
    """Number of equal vertical slices for a coverage fraction (>= 1)."""
    return max(1, round(1.0 / coverage))


def _pose(obj: ObjectSpec, frame: int) -> tuple[float, float]:
    return (
        obj.center[0] + frame * obj.velocity[0],
        obj.center[1] + frame * obj.velocity[1],
    )


def _shape_mask(obj: ObjectSpec, pose: tuple[float, float], width: int, height: int) -> np.ndarray:
    cx, cy = pose
    half_w = obj.size[0] / 2.0
    half_h = obj.size[1] / 2.0
    xs = np.arange(width, dtype=np.float64)[None, :]
    ys = np.arange(height, dtype=np.float64)[:, None]
    if obj.shape == "rectangle":
        return (np.abs(xs - cx) <= half_w) & (np.abs(ys - cy) <= half_h)
    return ((xs - cx) / half_w) ** 2 + ((ys - cy) / half_h) ** 2 <= 1.0


def _slice_grid(
    obj: ObjectSpec, pose: tuple[float, float], width: int, height: int, n_slices: int
) -> np.ndarray:
    # vertical strip index relative to the object's x extent; shifts exactly
    # with the object under translation
    xs = np.arange(width, dtype=np.float64)
    rel = (xs - (pose[0] - obj.size[0] / 2.0)) / obj.size[0]
    idx = np.clip(np.floor(rel * n_slices), 0, n_slices - 1).astype(np.int64)
    return np.broadcast_to(idx[None, :], (height, width))


def _slice_schedule(spec: SceneSpec, rng: np.random.Generator, n_slices: int) -> np.ndarray:
    if spec.activation.pattern == "rotating":
        frames = np.arange(spec.frames, dtype=np.int64) % n_slices
        return np.repeat(frames[:, None], len(spec.objects), axis=1)
    return rng.integers(0, n_slices, size=(spec.frames, len(spec.objects)), dtype=np.int64)


def analytic_union(spec: SceneSpec, frames: int | None = None) -> dict[int, ClassMask]:
    """Union of every frame's active slice, transported geometrically into
    the coordinates of frame ``frames - 1`` (default: the last frame).

    A transported pixel is kept only if its source position was inside the
    image when the slice was observed, mirroring what a raster can carry.
    """
    k = spec.frames if frames is None else frames
    if not 1 <= k <= spec.frames:
        raise InvalidSpec(f"frames must be in 1..{spec.frames}, got {k}")
    n_slices = slice_count(spec.activation.coverage)
    schedule = _slice_schedule(spec, np.random.default_rng(spec.seed), n_slices)
    xs = np.arange(spec.width, dtype=np.float64)[None, :]
    ys = np.arange(spec.height, dtype=np.float64)[:, None]
    out = {
        cid: np.zeros((spec.height, spec.width), dtype=bool)
        for cid in sorted({obj.class_id for obj in spec.objects})
    }
    for o, obj in enumerate(spec.objects):
        final_pose = _pose(obj, k - 1)
        body = _shape_mask(obj, final_pose, spec.width, spec.height)
        strips = _slice_grid(obj, final_pose, spec.width, spec.height, n_slices)
        for f in range(k):
            dx = (k - 1 - f) * obj.velocity[0]
            dy = (k - 1 - f) * obj.velocity[1]
            visible = (
                (xs - dx >= 0.0)
                & (xs - dx <= spec.width - 1.0)
                & (ys - dy >= 0.0)
                & (ys - dy <= spec.height - 1.0)
            )
            out[obj.class_id] |= body & (strips == schedule[f, o]) & visible
    return {cid: ClassMask(cid, mask) for cid, mask in out.items()}


def render(spec: SceneSpec) -> SceneRender:
    """Render a scene: activations, exact flows, saliency, and oracles.

    Deterministic given ``spec.seed``; the generator is consumed in a fixed
    order (slice schedule first, then per-frame flow noise).
    """
    rng = np.random.default_rng(spec.seed)
    n_slices = slice_count(spec.activation.coverage)
    schedule = _slice_schedule(spec, rng, n_slices)
    class_ids = sorted({obj.class_id for obj in spec.objects})

    activations: list[dict[int, ActivationMap]] = []
    saliency: list[Raster] = []
    for f in range(spec.frames):
        per_class = {cid: np.zeros((spec.height, spec.width), dtype=bool) for cid in class_ids}
        any_object = np.zeros((spec.height, spec.width), dtype=bool)
        for o, obj in enumerate(spec.objects):
            body = _shape_mask(obj, _pose(obj, f), spec.width, spec.height)
            if not body.any():
                raise InvalidSpec(f"object {o} leaves the frame entirely at frame {f}")
            strip = _slice_grid(obj, _pose(obj, f), spec.width, spec.height, n_slices)
            per_class[obj.class_id] |= body & (strip == schedule[f, o])
            any_object |= body
        activations.append(
            {cid: ActivationMap(cid, m.astype(np.float64)) for cid, m in per_class.items()}
        )
        saliency.append(Raster("saliency", any_object.astype(np.float64)))

    flows: list[FlowField] = []
    for f in range(spec.frames - 1):
        u = np.zeros((spec.height, spec.width), dtype=np.float64)
        v = np.zeros((spec.height, spec.width), dtype=np.float64)
        for obj in spec.objects:
            body = _shape_mask(obj, _pose(obj, f), spec.width, spec.height)
            u[body] = obj.velocity[0]
            v[body] = obj.velocity[1]
        if spec.flow_noise_sigma > 0:
            u = u + rng.normal(0.0, spec.flow_noise_sigma, u.shape)
            v = v + rng.normal(0.0, spec.flow_noise_sigma, v.shape)
        flows.append(FlowField(u, v))

    full = {cid: np.zeros((spec.height, spec.width), dtype=bool) for cid in class_ids}
    for obj in spec.objects:
        full[obj.class_id] |= _shape_mask(obj, _pose(obj, spec.frames - 1), spec.width, spec.height)

    return SceneRender(
        spec=spec,
        activations=tuple(activations),
        flows=tuple(flows),
        saliency=tuple(saliency),
        oracle_union=analytic_union(spec),
        full_object_mask={cid: ClassMask(cid, m) for cid, m in full.items()},
    )


def random_scene(
    seed: int,
    *,
    width: int = 64,
    height: int = 64,
    frames: int = 5,
    coverage: float = 0.2,
    pattern: str = "rotating",
    n_classes: int = 1,
    integer_motion: bool = True,
    max_speed: int = 3,
    flow_noise_sigma: float = 0.0,
) -> SceneSpec:
    """Random scene whose objects stay fully inside the frame at all times.

    One object per class, each confined to its own horizontal band so the
    classes never overlap. Centers land on the half-pixel grid and sizes
    are integral; with ``integer_motion`` velocities are integral too, so
    rasterization commutes with the motion and warp-vs-oracle comparisons
    are exact. Otherwise velocities are quarter-pixel multiples.
    """
    rng = np.random.default_rng(seed)
    band_h = height // n_classes
    objects = []
    for i in range(n_classes):
        shape = "rectangle" if rng.integers(2) == 0 else "disk"
        size_w = int(rng.integers(10, min(23, width // 2)))
        size_h = int(rng.integers(8, max(9, min(23, band_h - 6))))

        def _axis(extent_lo: float, extent_hi: float, size: float) -> tuple[float, float]:
            speed = (
                float(rng.integers(-max_speed, max_speed + 1))
                if integer_motion
                else float(rng.integers(-4 * max_speed, 4 * max_speed + 1)) / 4.0
            )
            while True:
                travel = (frames - 1) * speed
                lo = extent_lo + size / 2.0 + max(0.0, -travel)
                hi = extent_hi - size / 2.0 - max(0.0, travel)
                if hi >= lo:
                    break
                speed = speed - 0.5 if speed > 0 else speed + 0.5  # shrink until feasible
            steps = int((hi - lo) * 2) + 1
            center = lo + float(rng.integers(0, steps)) * 0.5
            return center, speed

        cx, dx = _axis(0.0, width - 1.0, size_w)
        cy, dy = _axis(i * band_h, (i + 1) * band_h - 1.0, size_h)
        objects.append(
            ObjectSpec(
                class_id=i + 1,
                center=(cx, cy),
                size=(float(size_w), float(size_h)),
                shape=shape,
                velocity=(dx, dy),
            )
        )
    return SceneSpec(
        seed=seed,
        width=width,
        height=height,
        frames=frames,
        objects=tuple(objects),
        activation=ActivationModel(coverage=coverage, pattern=pattern),
        flow_noise_sigma=flow_noise_sigma,
    )


# ---------------------------------------------------------------------------
# On-disk corpora


@dataclass(frozen=True)
class VideoSpec:
    """One synthetic video of a dataset corpus.

    ``score_dropout_frames`` lists frames whose classifier scores are
    zeroed, which breaks any window spanning them. ``flipped_cams`` adds a
    horizontally flipped duplicate of every activation raster so the
    fusion stage has more than one transform to undo.
    """

    video_id: str
    scene: SceneSpec
    search_class: int
    score_dropout_frames: tuple[int, ...] = ()
    flipped_cams: bool = False


def write_scene(rendered: SceneRender, out_dir: str | Path) -> Path:
    """Write a rendered scene and return the aggregation manifest path.

    Layout: one activation raster per (frame, class), one saliency raster
    per frame, one .flo per adjacent pair, plus the analytic oracle and
    full-object masks for reference.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = rendered.spec
    class_ids = sorted(rendered.oracle_union)
    frames_doc = []
    for f, per_class in enumerate(rendered.activations):
        entry: dict = {"frame_id": f, "activations": {}}
        for cid in class_ids:
            name = f"act_f{f:03d}_c{cid}.png"
            write_raster(Raster("activation", per_class[cid].values), out / name)
            entry["activations"][str(cid)] = name
        write_raster(rendered.saliency[f], out / f"sal_f{f:03d}.png")
        frames_doc.append(entry)
    flow_names = []
    for f, flow in enumerate(rendered.flows):
        name = f"flow_{f:03d}_{f + 1:03d}.flo"
        write_flo(flow, out / name)
        flow_names.append(name)
    for cid in class_ids:
        write_raster(
            Raster("activation", rendered.oracle_union[cid].mask.astype(np.float64)),
            out / f"oracle_c{cid}.png",
        )
        write_raster(
            Raster("activation", rendered.full_object_mask[cid].mask.astype(np.float64)),
            out / f"full_c{cid}.png",
        )
    manifest = {
        "width": spec.width,
        "height": spec.height,
        "classes": class_ids,
        "frames": frames_doc,
        "flows": flow_names,
    }
    manifest_path = out / "aggregate_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def build_dataset(
    class_names: Sequence[str],
    videos: Sequence[VideoSpec],
    out_dir: str | Path,
) -> Path:
    """Write a pipeline-consumable corpus and return the manifest path.

    Produces classes.txt, one directory per video (scores, activation and
    saliency rasters, flow files), and manifest.json tying them together.
    Scores are 0.97 for classes present in the video, 0.03 otherwise, and
    0.0 for every class on dropout frames.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "classes.txt").write_text("".join(f"{n}\n" for n in class_names))
    videos_doc = []
    for vid in videos:
        scene = vid.scene
        vdir = out / vid.video_id
        vdir.mkdir(exist_ok=True)
        rendered = render(scene)
        present = sorted({obj.class_id for obj in scene.objects})
        if vid.search_class not in present:
            raise InvalidSpec(
                f"{vid.video_id}: search class {vid.search_class} not in scene classes {present}"
            )

        score_frames = []
        for f in range(scene.frames):
            if f in vid.score_dropout_frames:
                scores = {name: 0.0 for name in class_names}
            else:
                scores = {
                    name: (0.97 if (i + 1) in present else 0.03)
                    for i, name in enumerate(class_names)
                }
            score_frames.append({"frame_id": f, "scores": scores})
        scores_doc = {
            "video_id": vid.video_id,
            "search_class": class_names[vid.search_class - 1],
            "frames": score_frames,
        }
        (vdir / "scores.json").write_text(json.dumps(scores_doc, indent=2, sort_keys=True))

        frames_doc = []
        for f, per_class in enumerate(rendered.activations):
            cams = []
            for cid in present:
                name = f"{vid.video_id}/cam_f{f:03d}_c{cid}.png"
                write_raster(Raster("activation", per_class[cid].values), out / name)
                cams.append({"class_id": cid, "flip": False, "scale": 1.0, "raster_path": name})
                if vid.flipped_cams:
                    fname = f"{vid.video_id}/cam_f{f:03d}_c{cid}_flip.png"
                    write_raster(
                        Raster("activation", per_class[cid].values[:, ::-1]), out / fname
                    )
                    cams.append({"class_id": cid, "flip": True, "scale": 1.0, "raster_path": fname})
            sal_name = f"{vid.video_id}/sal_f{f:03d}.png"
            write_raster(rendered.saliency[f], out / sal_name)
            frame_doc = {"frame_id": f, "cams": cams, "saliency": sal_name}
            if f < scene.frames - 1:
                flow_name = f"{vid.video_id}/flow_f{f:03d}.flo"
                write_flo(rendered.flows[f], out / flow_name)
                frame_doc["flow_to_next"] = flow_name
            frames_doc.append(frame_doc)

        videos_doc.append(
            {
                "video_id": vid.video_id,
                "width": scene.width,
                "height": scene.height,
                "scores": f"{vid.video_id}/scores.json",
                "frames": frames_doc,
            }
        )
    manifest = {"classes": "classes.txt", "videos": videos_doc}
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def random_dataset_videos(
    n_videos: int,
    seed: int,
    class_names: Sequence[str],
    *,
    frames: int = 5,
    width: int = 64,
    height: int = 64,
    coverage: float = 0.2,
    flipped_cams: bool = False,
    dropout_videos: Sequence[int] = (),
) -> list[VideoSpec]:
    """Random video specs for a corpus; ``dropout_videos`` lists indices
    whose middle frame loses its scores (so they cannot pass filtering
    when frames == window size)."""
    rng = np.random.default_rng(seed)
    videos = []
    for i in range(n_videos):
        n_classes = int(rng.integers(1, min(3, len(class_names)) + 1))
        scene = random_scene(
            int(rng.integers(0, 2**31)),
            width=width,
            height=height,
            frames=frames,
            coverage=coverage,
            n_classes=n_classes,
        )
        dropout = (frames // 2,) if i in dropout_videos else ()
        videos.append(
            VideoSpec(
                video_id=f"vid{i:03d}",
                scene=scene,
                search_class=int(rng.integers(1, n_classes + 1)),
                score_dropout_frames=dropout,
                flipped_cams=flipped_cams,
            )
        )
    return videos


# ---------------------------------------------------------------------------
# JSON spec parsing (CLI surface)


def scene_spec_from_dict(doc: dict) -> SceneSpec:
    try:
        objects = tuple(
            ObjectSpec(
                class_id=int(o["class_id"]),
                center=(float(o["center"][0]), float(o["center"][1])),
                size=(float(o["size"][0]), float(o["size"][1])),
                shape=str(o.get("shape", "rectangle")),
                velocity=(
                    float(o.get("velocity", (0, 0))[0]),
                    float(o.get("velocity", (0, 0))[1]),
                ),
            )
            for o in doc["objects"]
        )
        activation = ActivationModel(
            coverage=float(doc.get("activation", {}).get("coverage", 1.0)),
            pattern=str(doc.get("activation", {}).get("pattern", "rotating")),
        )
        return SceneSpec(
            seed=int(doc.get("seed", 0)),
            width=int(doc["width"]),
            height=int(doc["height"]),
            frames=int(doc["frames"]),
            objects=objects,
            activation=activation,
            flow_noise_sigma=float(doc.get("flow_noise_sigma", 0.0)),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidSpec(f"malformed scene spec: {exc}") from exc


def dataset_from_dict(doc: dict) -> tuple[list[str], list[VideoSpec]]:
    """Parse a dataset spec: explicit per-video scenes or a random corpus.

    Shape: {"classes": [names], "videos": [{video_id, search_class,
    scene: {...}, score_dropout_frames?, flipped_cams?}]} or
    {"classes": [names], "random": {"n_videos": N, "seed": S, ...}}.
    """
    try:
        class_names = [str(n) for n in doc["classes"]]
        if "random" in doc:
            params = dict(doc["random"])
            videos = random_dataset_videos(
                int(params.pop("n_videos")),
                int(params.pop("seed", 0)),
                class_names,
                **{k: v for k, v in params.items()},
            )
            return class_names, videos
        name_to_index = {n: i + 1 for i, n in enumerate(class_names)}
        videos = []
        for v in doc["videos"]:
            search = v["search_class"]
            search_id = name_to_index[search] if isinstance(search, str) else int(search)
            videos.append(
                VideoSpec(
                    video_id=str(v["video_id"]),
                    scene=scene_spec_from_dict(v["scene"]),
                    search_class=search_id,
                    score_dropout_frames=tuple(int(f) for f in v.get("score_dropout_frames", ())),
                    flipped_cams=bool(v.get("flipped_cams", False)),
                )
            )
        return class_names, videos
    except (KeyError, TypeError) as exc:
        raise InvalidSpec(f"malformed dataset spec: {exc}") from exc
