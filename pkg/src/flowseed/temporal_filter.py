"""Per-frame label inference and selection of usable frame windows.

Frames get a label set (classes scoring strictly above a threshold); a
window of consecutive frames qualifies when all of them carry the same
non-empty label set and that set contains the search-term class. Videos
without a qualifying window are dropped by callers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError

OVERLAP_POLICIES = ("all", "disjoint")
PICK_POLICIES = ("first", "longest-run-center")


@dataclass(frozen=True)
class ScoreVector:
    """One frame's post-sigmoid class scores, keyed by class index."""

    frame_id: int
    scores: Mapping[int, float]

    def __post_init__(self) -> None:
        for cid, score in self.scores.items():
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score for class {cid} outside [0, 1]: {score}")


@dataclass(frozen=True)
class FilterConfig:
    score_threshold: float = 0.9
    window_size: int = 5
    search_class: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ConfigError(f"score_threshold outside [0, 1]: {self.score_threshold}")
        if self.window_size < 1:
            raise ConfigError(f"window_size must be >= 1, got {self.window_size}")


@dataclass(frozen=True)
class Window:
    """A qualifying run of window_size consecutive frames, by start index."""

    start: int
    labels: frozenset[int] = field(default_factory=frozenset)


def infer_labels(scores: ScoreVector, score_threshold: float) -> frozenset[int]:
    """Classes whose score is strictly above the threshold; ties excluded."""
    return frozenset(c for c, s in scores.scores.items() if s > score_threshold)


def select_windows(
    label_sets: Sequence[frozenset[int]],
    cfg: FilterConfig,
    overlap: str = "all",
) -> list[Window]:
    """Find qualifying windows of exactly ``cfg.window_size`` frames.

    A window qualifies when every frame in it carries the same non-empty
    label set and that set contains ``cfg.search_class``. ``overlap="all"``
    reports every qualifying start; ``"disjoint"`` greedily skips ahead by
    the window size after each hit. Starts are ascending; empty list when
    nothing qualifies (including sequences shorter than the window).
    """
    if overlap not in OVERLAP_POLICIES:
        raise ConfigError(f"overlap must be one of {OVERLAP_POLICIES}, got {overlap!r}")
    k = cfg.window_size
    n = len(label_sets)
    windows: list[Window] = []
    start = 0
    while start <= n - k:
        labels = label_sets[start]
        ok = (
            bool(labels)
            and cfg.search_class in labels
            and all(label_sets[start + i] == labels for i in range(1, k))
        )
        if ok:
            windows.append(Window(start, frozenset(labels)))
            start += k if overlap == "disjoint" else 1
        else:
            start += 1
    return windows


def pick_one_window(windows: Sequence[Window], policy: str = "first") -> Window | None:
    """Deterministically choose a single window, or None when none exist.

    ``"first"`` takes the lowest start. ``"longest-run-center"`` groups
    windows whose starts are consecutive and labels equal into runs, then
    takes the center window of the longest run (earliest run on ties).
    """
    if policy not in PICK_POLICIES:
        raise ConfigError(f"policy must be one of {PICK_POLICIES}, got {policy!r}")
    if not windows:
        return None
    if policy == "first":
        return min(windows, key=lambda w: w.start)
    runs: list[list[Window]] = []
    for window in sorted(windows, key=lambda w: w.start):
        if runs and window.start == runs[-1][-1].start + 1 and window.labels == runs[-1][-1].labels:
            runs[-1].append(window)
        else:
            runs.append([window])
    best = max(runs, key=len)
    return best[(len(best) - 1) // 2]


@dataclass(frozen=True)
class VideoScores:
    """Parsed score file: per-frame score vectors plus the search class."""

    video_id: str
    search_class: int
    frames: tuple[ScoreVector, ...]


def load_class_names(path: str | Path) -> list[str]:
    """Ordered foreground class names, one per line; blank lines ignored."""
    names = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate class names")
    return names


def class_index_map(names: Sequence[str]) -> dict[str, int]:
    """Name -> label index. Index 0 is reserved for background, so
    foreground classes are numbered from 1 in file order."""
    return {name: i + 1 for i, name in enumerate(names)}


def load_score_file(path: str | Path, name_to_index: Mapping[str, int]) -> VideoScores:
    """Parse one video's score document.

    Expected JSON shape: {video_id, search_class, frames: [{frame_id,
    scores: {class_name: value}}]}. Frames must be contiguous and ordered
    by frame_id. Unknown class names raise :class:`ConfigError`.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        video_id = str(doc["video_id"])
        search_name = str(doc["search_class"])
        raw_frames = doc["frames"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: missing score-file field ({exc})") from exc
    if search_name not in name_to_index:
        raise ConfigError(f"{path}: unknown search class {search_name!r}")
    frames: list[ScoreVector] = []
    for i, raw in enumerate(raw_frames):
        frame_id = int(raw["frame_id"])
        if frames and frame_id != frames[0].frame_id + i:
            raise ConfigError(f"{path}: frame ids must be contiguous and ascending")
        scores: dict[int, float] = {}
        for name, value in raw["scores"].items():
            if name not in name_to_index:
                raise ConfigError(f"{path}: unknown class name {name!r}")
            scores[name_to_index[name]] = float(value)
        frames.append(ScoreVector(frame_id=frame_id, scores=scores))
    return VideoScores(
        video_id=video_id,
        search_class=name_to_index[search_name],
        frames=tuple(frames),
    )
