import numpy as np
import pytest

from flowseed.cam_fusion import (
    ActivationMap,
    TransformTag,
    apply_transform,
    fuse_max,
    inverse_transform,
    resize_bilinear,
    scaled_size,
)
from flowseed.errors import ClassMismatch, DimensionMismatch, EmptyInput


def rand_map(rng, w=16, h=12, class_id=1):
    return ActivationMap(class_id, rng.random((h, w)))


def test_identity_tag_is_identity():
    rng = np.random.default_rng(0)
    amap = rand_map(rng)
    out = inverse_transform(amap, TransformTag(), amap.width, amap.height)
    assert np.array_equal(out.values, amap.values)


def test_unflip_mirrors_hot_pixel():
    values = np.zeros((5, 9))
    values[2, 3] = 1.0
    out = inverse_transform(ActivationMap(1, values), TransformTag(flip=True), 9, 5)
    assert out.values[2, 9 - 1 - 3] == 1.0
    assert out.values.sum() == 1.0


def test_unscale_constant_stays_constant():
    out = inverse_transform(
        ActivationMap(1, np.full((24, 32), 0.7)), TransformTag(scale=2.0), 16, 12
    )
    assert out.values.shape == (12, 16)
    assert np.allclose(out.values, 0.7, atol=1e-12)


def test_scaled_size_round_half_up():
    assert scaled_size(10, 10, 1.25) == (13, 13)  # 12.5 rounds up
    assert scaled_size(7, 5, 0.5) == (4, 3)  # 3.5 -> 4, 2.5 -> 3


def test_dimension_mismatch_detected():
    amap = ActivationMap(1, np.zeros((10, 10)))
    with pytest.raises(DimensionMismatch):
        inverse_transform(amap, TransformTag(scale=2.0), 16, 12)


def test_double_flip_identity():
    rng = np.random.default_rng(3)
    amap = rand_map(rng, w=21, h=13)
    flipped = apply_transform(amap, TransformTag(flip=True))
    back = inverse_transform(flipped, TransformTag(flip=True), amap.width, amap.height)
    assert np.array_equal(back.values, amap.values)


def test_scale_down_then_inverse_recovers_smooth_map():
    # smooth ramp survives a 2x round trip closely (not exactly)
    ys, xs = np.mgrid[0:20, 0:30]
    amap = ActivationMap(1, (xs + ys) / (29 + 19))
    big = apply_transform(amap, TransformTag(scale=2.0))
    back = inverse_transform(big, TransformTag(scale=2.0), 30, 20)
    assert np.abs(back.values - amap.values).max() < 0.02


def test_fuse_single_map_identity():
    rng = np.random.default_rng(1)
    amap = rand_map(rng)
    assert np.array_equal(fuse_max([amap]).values, amap.values)


def test_fuse_left_right_halves():
    left = np.zeros((4, 8))
    left[:, :4] = 1.0
    right = np.zeros((4, 8))
    right[:, 4:] = 1.0
    fused = fuse_max([ActivationMap(2, left), ActivationMap(2, right)])
    assert (fused.values == 1.0).all()


def test_fuse_matches_pixel_loop():
    rng = np.random.default_rng(11)
    maps = [rand_map(rng, w=7, h=5) for _ in range(5)]
    fused = fuse_max(maps)
    for y in range(5):
        for x in range(7):
            assert fused.values[y, x] == max(m.values[y, x] for m in maps)


def test_fuse_laws():
    rng = np.random.default_rng(12)
    maps = [rand_map(rng, w=9, h=6) for _ in range(4)]
    fused = fuse_max(maps)
    for m in maps:
        assert (fused.values >= m.values).all()  # pointwise dominance
    assert np.array_equal(fuse_max([maps[0], maps[0]]).values, maps[0].values)
    perm = [maps[i] for i in (2, 0, 3, 1)]
    assert np.array_equal(fuse_max(perm).values, fused.values)


def test_fuse_errors():
    rng = np.random.default_rng(2)
    with pytest.raises(EmptyInput):
        fuse_max([])
    with pytest.raises(ClassMismatch):
        fuse_max([rand_map(rng, class_id=1), rand_map(rng, class_id=2)])
    with pytest.raises(DimensionMismatch):
        fuse_max([rand_map(rng, w=8), rand_map(rng, w=9)])


def test_resize_bilinear_preserves_range():
    rng = np.random.default_rng(4)
    values = rng.random((11, 17))
    out = resize_bilinear(values, 40, 23)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert out.shape == (23, 40)
