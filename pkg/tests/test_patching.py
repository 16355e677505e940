import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_ref, stats_ref
from srdistill.patching import Patch, extract_patch_grid, grid_stats, patch_stats


def _img(h, w, c=3, seed=0):
    return np.random.default_rng(seed).random((h, w, c)).astype(np.float32)


def test_grid_128_by_64():
    ps = extract_patch_grid(_img(128, 128), 64, "x")
    assert [p.origin for p in ps] == [(0, 0), (0, 64), (64, 0), (64, 64)]
    assert all(p.pixels.shape == (64, 64, 3) and p.source_id == "x" for p in ps)


def test_partial_tiles_dropped():
    ps = extract_patch_grid(_img(100, 100), 64)
    assert [p.origin for p in ps] == [(0, 0)]


def test_grid_enumeration_oracle():
    ps = extract_patch_grid(_img(256, 192), 64)
    assert len(ps) == 12
    assert [p.origin for p in ps] == grid_ref(256, 192, 64)


def test_patch_larger_than_image():
    assert extract_patch_grid(_img(10, 12), 16) == []


def test_patch_size_minimum():
    with pytest.raises(ValueError):
        extract_patch_grid(_img(8, 8), 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 70), st.integers(1, 70), st.integers(2, 20))
def test_grid_completeness(h, w, s):
    cover = np.zeros((h, w), int)
    for p in extract_patch_grid(_img(h, w, 1), s):
        r, c = p.origin
        assert r % s == 0 and c % s == 0
        cover[r : r + s, c : c + s] += 1
    assert np.all(cover[: (h // s) * s, : (w // s) * s] == 1)
    assert cover.sum() == (h // s) * (w // s) * s * s


def test_constant_patch_stats():
    st_ = patch_stats(Patch(np.full((8, 8, 1), 0.7, np.float32), "", (0, 0)))
    assert st_.sigma == 0.0
    assert st_.mean == pytest.approx(0.7, abs=1e-7)


def test_two_point_patch_stats():
    px = np.zeros((8, 8, 3), np.float32)
    px[:4] = 1.0
    st_ = patch_stats(Patch(px, "", (0, 0)))
    assert st_.mean == 0.5
    assert st_.sigma == 0.25


@pytest.mark.parametrize("c", [1, 3])
def test_stats_against_two_pass_oracle(c, rng):
    for seed in range(10):
        px = _img(12, 12, c, seed)
        st_ = patch_stats(Patch(px, "", (0, 0)))
        var, mean = stats_ref(px)
        assert st_.mean == pytest.approx(mean, abs=1e-12)
        assert st_.sigma == pytest.approx(var, abs=1e-12)
        assert 0 <= st_.sigma <= 0.25


def test_grid_stats_equal_per_patch_stats():
    img = _img(50, 70)
    var, mean = grid_stats(img, 16)
    for p in extract_patch_grid(img, 16):
        r, c = p.origin[0] // 16, p.origin[1] // 16
        assert patch_stats(p) == (var[r, c], mean[r, c])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_affine_response(seed, c):
    px = _img(8, 8, 1, seed)
    base = patch_stats(Patch(px, "", (0, 0)))
    scaled = patch_stats(Patch((px * np.float32(c)).astype(np.float32), "", (0, 0)))
    assert scaled.mean == pytest.approx(c * base.mean, abs=1e-6)
    assert scaled.sigma == pytest.approx(c * c * base.sigma, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    px = rng.random((8, 8, 3)).astype(np.float32)
    flat = px.reshape(64, 3)
    shuffled = flat[rng.permutation(64)].reshape(8, 8, 3)
    a = patch_stats(Patch(px, "", (0, 0)))
    b = patch_stats(Patch(shuffled, "", (0, 0)))
    assert a.mean == pytest.approx(b.mean, abs=1e-12)
    assert a.sigma == pytest.approx(b.sigma, abs=1e-12)
