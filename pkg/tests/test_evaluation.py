import numpy as np
import pytest

from flowseed.errors import DimensionMismatch, EmptyMatrix, IgnoreInPrediction
from flowseed.evaluation import ConfusionMatrix, format_table
from flowseed.flow_io import IGNORE_LABEL


def loop_confusion(gt, pred, n):
    counts = np.zeros((n, n), np.int64)
    for g, p in zip(gt.ravel(), pred.ravel()):
        if g != IGNORE_LABEL:
            counts[g, p] += 1
    return counts


def test_perfect_prediction_is_diagonal():
    gt = np.array([[0, 1], [1, 0]], np.uint8)
    cm = ConfusionMatrix(2).accumulate(gt, gt)
    assert np.array_equal(cm.counts, np.diag([2, 2]))
    result = cm.miou()
    assert result.per_class == {0: 1.0, 1: 1.0}
    assert result.mean == 1.0


def test_all_ignore_changes_nothing():
    gt = np.full((4, 4), IGNORE_LABEL, np.uint8)
    pred = np.zeros((4, 4), np.uint8)
    cm = ConfusionMatrix(3).accumulate(gt, pred)
    assert cm.total() == 0
    with pytest.raises(EmptyMatrix):
        cm.miou()


def test_matches_pixel_loop_on_random_pairs():
    rng = np.random.default_rng(31)
    for _ in range(20):
        gt = rng.choice([0, 1, 2, 3, IGNORE_LABEL], size=(8, 8)).astype(np.uint8)
        pred = rng.integers(0, 4, size=(8, 8)).astype(np.uint8)
        cm = ConfusionMatrix(4).accumulate(gt, pred)
        assert np.array_equal(cm.counts, loop_confusion(gt, pred, 4))


def test_known_iou_value():
    # class 1: four gt pixels, four predicted, two overlapping -> 2/6
    gt = np.zeros((3, 4), np.uint8)
    pred = np.zeros((3, 4), np.uint8)
    gt[0, 0:4] = 1
    pred[0, 2:4] = 1
    pred[1, 0:2] = 1
    cm = ConfusionMatrix(2).accumulate(gt, pred)
    assert cm.miou().per_class[1] == pytest.approx(2 / 6)


def test_disjoint_class_scores_zero():
    gt = np.array([[1, 1, 0, 0]], np.uint8)
    pred = np.array([[0, 0, 1, 1]], np.uint8)
    cm = ConfusionMatrix(2).accumulate(gt, pred)
    assert cm.miou().per_class[1] == 0.0


def test_zero_denominator_class_excluded_from_mean():
    gt = np.array([[0, 0]], np.uint8)
    cm = ConfusionMatrix(3).accumulate(gt, gt)
    result = cm.miou()
    assert set(result.per_class) == {0}
    assert result.excluded == (1, 2)
    assert result.mean == 1.0


def test_ignore_in_prediction_rejected():
    gt = np.zeros((2, 2), np.uint8)
    pred = np.full((2, 2), IGNORE_LABEL, np.uint8)
    with pytest.raises(IgnoreInPrediction):
        ConfusionMatrix(2).accumulate(gt, pred)


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        ConfusionMatrix(2).accumulate(np.zeros((2, 2), np.uint8), np.zeros((2, 3), np.uint8))


def test_label_out_of_range_rejected():
    gt = np.array([[5]], np.uint8)
    with pytest.raises(ValueError):
        ConfusionMatrix(3).accumulate(gt, gt)


def test_accumulation_order_does_not_matter():
    rng = np.random.default_rng(32)
    pairs = [
        (
            rng.integers(0, 3, (6, 6)).astype(np.uint8),
            rng.integers(0, 3, (6, 6)).astype(np.uint8),
        )
        for _ in range(5)
    ]
    a = ConfusionMatrix(3)
    for gt, pred in pairs:
        a.accumulate(gt, pred)
    b = ConfusionMatrix(3)
    for gt, pred in reversed(pairs):
        b.accumulate(gt, pred)
    assert np.array_equal(a.counts, b.counts)


def test_parallel_merge_equals_sequential():
    rng = np.random.default_rng(33)
    pairs = [
        (
            rng.integers(0, 3, (5, 5)).astype(np.uint8),
            rng.integers(0, 3, (5, 5)).astype(np.uint8),
        )
        for _ in range(6)
    ]
    seq = ConfusionMatrix(3)
    for gt, pred in pairs:
        seq.accumulate(gt, pred)
    parts = [ConfusionMatrix(3).accumulate(gt, pred) for gt, pred in pairs]
    merged = parts[0]
    for part in parts[1:]:
        merged = merged.merge(part)
    assert np.array_equal(merged.counts, seq.counts)


def test_iou_bounds_and_mean_between_extremes():
    rng = np.random.default_rng(34)
    gt = rng.integers(0, 4, (20, 20)).astype(np.uint8)
    pred = rng.integers(0, 4, (20, 20)).astype(np.uint8)
    result = ConfusionMatrix(4).accumulate(gt, pred).miou()
    values = list(result.per_class.values())
    assert all(0.0 <= v <= 1.0 for v in values)
    assert min(values) <= result.mean <= max(values)


def test_format_table_alignment():
    gt = np.array([[0, 1]], np.uint8)
    result = ConfusionMatrix(2).accumulate(gt, gt).miou()
    table = format_table(result, {0: "background", 1: "horse"})
    lines = table.splitlines()
    assert lines[0].startswith("background")
    assert lines[-1].startswith("mean")
    assert "1.0000" in lines[-1]
