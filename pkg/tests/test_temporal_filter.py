import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowseed.temporal_filter import (
    FilterConfig,
    ScoreVector,
    Window,
    class_index_map,
    infer_labels,
    load_class_names,
    load_score_file,
    pick_one_window,
    select_windows,
)

HORSE, PERSON, CAT = 1, 2, 3


def brute_force_windows(label_sets, k, search):
    out = []
    for s in range(len(label_sets) - k + 1):
        run = label_sets[s : s + k]
        if run[0] and search in run[0] and all(r == run[0] for r in run):
            out.append((s, run[0]))
    return out


def test_all_below_threshold_gives_empty_set():
    sv = ScoreVector(0, {HORSE: 0.0, PERSON: 0.0})
    assert infer_labels(sv, 0.9) == frozenset()


def test_rider_example():
    sv = ScoreVector(0, {HORSE: 0.95, PERSON: 0.91, CAT: 0.5})
    assert infer_labels(sv, 0.9) == {HORSE, PERSON}


def test_score_equal_to_threshold_excluded():
    sv = ScoreVector(0, {HORSE: 0.9})
    assert infer_labels(sv, 0.9) == frozenset()


def test_constant_run_single_window():
    labels = [frozenset({HORSE})] * 5
    cfg = FilterConfig(window_size=5, search_class=HORSE)
    assert select_windows(labels, cfg) == [Window(0, frozenset({HORSE}))]


def test_label_set_break_kills_window():
    labels = [
        frozenset({HORSE}),
        frozenset({HORSE, PERSON}),
        frozenset({HORSE}),
        frozenset({HORSE}),
        frozenset({HORSE}),
    ]
    cfg = FilterConfig(window_size=5, search_class=HORSE)
    assert select_windows(labels, cfg) == []


def test_overlap_policies_on_long_run():
    # constant {cat} on frames 2..11 of a 12-frame sequence
    labels = [frozenset()] * 2 + [frozenset({CAT})] * 10
    cfg = FilterConfig(window_size=5, search_class=CAT)
    all_starts = [w.start for w in select_windows(labels, cfg)]
    assert all_starts == [2, 3, 4, 5, 6, 7]
    disjoint = [w.start for w in select_windows(labels, cfg, overlap="disjoint")]
    assert disjoint == [2, 7]
    assert pick_one_window(select_windows(labels, cfg)).start == 2


def test_empty_label_sets_never_qualify():
    labels = [frozenset()] * 6
    cfg = FilterConfig(window_size=3, search_class=HORSE)
    assert select_windows(labels, cfg) == []


def test_short_sequence_returns_empty():
    cfg = FilterConfig(window_size=5, search_class=HORSE)
    assert select_windows([frozenset({HORSE})] * 4, cfg) == []


def test_pick_policies():
    assert pick_one_window([]) is None
    windows = [Window(2, frozenset({HORSE})), Window(7, frozenset({HORSE}))]
    assert pick_one_window(windows, "first").start == 2
    # run of 9 qualifying frames, k=5 -> starts 0..4, center start 2
    labels = [frozenset({HORSE})] * 9
    cfg = FilterConfig(window_size=5, search_class=HORSE)
    found = select_windows(labels, cfg)
    assert [w.start for w in found] == [0, 1, 2, 3, 4]
    assert pick_one_window(found, "longest-run-center").start == 2


def test_longest_run_center_prefers_longer_run():
    labels = (
        [frozenset({HORSE})] * 3
        + [frozenset()]
        + [frozenset({HORSE})] * 7
    )
    cfg = FilterConfig(window_size=3, search_class=HORSE)
    found = select_windows(labels, cfg)
    picked = pick_one_window(found, "longest-run-center")
    # second run has starts 4..8, center 6
    assert picked.start == 6


@settings(max_examples=200, deadline=None)
@given(
    seq=st.lists(
        st.frozensets(st.integers(1, 4), max_size=4), min_size=0, max_size=20
    ),
    k=st.integers(1, 6),
    search=st.integers(1, 4),
)
def test_select_windows_matches_brute_force(seq, k, search):
    cfg = FilterConfig(window_size=k, search_class=search)
    got = [(w.start, w.labels) for w in select_windows(seq, cfg)]
    assert got == brute_force_windows(seq, k, search)


def test_tau_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(50):
        scores = ScoreVector(0, {c: float(rng.random()) for c in range(1, 6)})
        t1, t2 = sorted(rng.random(2))
        assert infer_labels(scores, t2) <= infer_labels(scores, t1)


def test_score_vector_permutation_invariant():
    items = [(HORSE, 0.95), (PERSON, 0.4), (CAT, 0.92)]
    a = ScoreVector(0, dict(items))
    b = ScoreVector(0, dict(reversed(items)))
    assert infer_labels(a, 0.9) == infer_labels(b, 0.9)


def test_load_score_file(tmp_path):
    classes = tmp_path / "classes.txt"
    classes.write_text("horse\nperson\n")
    names = load_class_names(classes)
    idx = class_index_map(names)
    assert idx == {"horse": 1, "person": 2}
    doc = {
        "video_id": "v1",
        "search_class": "horse",
        "frames": [
            {"frame_id": 0, "scores": {"horse": 0.95, "person": 0.2}},
            {"frame_id": 1, "scores": {"horse": 0.97, "person": 0.1}},
        ],
    }
    import json

    scores_path = tmp_path / "scores.json"
    scores_path.write_text(json.dumps(doc))
    video = load_score_file(scores_path, idx)
    assert video.video_id == "v1"
    assert video.search_class == 1
    assert infer_labels(video.frames[0], 0.9) == {1}


def test_load_score_file_rejects_unknown_class(tmp_path):
    import json

    from flowseed.errors import ConfigError

    classes = tmp_path / "classes.txt"
    classes.write_text("horse\n")
    path = tmp_path / "scores.json"
    path.write_text(
        json.dumps(
            {
                "video_id": "v",
                "search_class": "horse",
                "frames": [{"frame_id": 0, "scores": {"zebra": 0.5}}],
            }
        )
    )
    with pytest.raises(ConfigError):
        load_score_file(path, class_index_map(load_class_names(classes)))
