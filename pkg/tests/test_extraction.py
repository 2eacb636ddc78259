import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import brute_nearest_hex, grid_filter_stats
from plenogt import presets
from plenogt.camera import CameraRig, SensorSpec
from plenogt.extraction import (
    Correspondence,
    DegenerateBasis,
    ExtractionConfig,
    compare_correspondences,
    extract,
    grid_filter,
    grid_stats,
    interpolate_corner,
    local_spacing,
    naive_search,
    pixel_ray,
    positional_from_planes,
    select_quad,
    solve_st,
    split_microlens_images,
)
from plenogt.optics import HexIndex, PlaneGeom
from plenogt.scene import make_checkerboard

LAM_D = 0.15
LAM_ALPHA = math.radians(10.0)


def _grid(h=6, w=6, A=np.eye(2), b=(0.0, 0.0)):
    """J[row, col] = A @ (col, row) + b."""
    rows, cols = np.mgrid[0:h, 0:w]
    ij = np.stack([cols, rows], axis=-1).astype(np.float64)
    return ij @ np.asarray(A, dtype=np.float64).T + np.asarray(b)


# --- grid filter -------------------------------------------------------------

# angle at J(0, 0) after moving it to (delta, delta) is exactly 105 degrees
_C15 = math.sin(math.radians(15.0))
ANGLE_DELTA = (1.0 - math.sqrt(1.0 - 4.0 * _C15 / (2.0 + 2.0 * _C15))) / 2.0


def test_perfect_grid_passes():
    res, stats = grid_filter(_grid(4, 4), (1, 1), LAM_D, LAM_ALPHA)
    assert res.passed and res.reason is None
    assert stats.d_vert == 1.0 and stats.d_horiz == 1.0
    assert stats.alpha == pytest.approx(math.pi / 2, abs=1e-15)
    assert stats.vert_dev.max() == 0.0 and stats.angle_dev.max() == 0.0


def test_stretched_edge_fails_on_length():
    J = _grid(4, 4)
    J[0, 3, 0] += 0.3
    res, stats = grid_filter(J, (1, 1), LAM_D, LAM_ALPHA)
    assert not res.passed and res.reason == "length"
    assert stats.d_horiz == pytest.approx(1.025, abs=1e-15)
    assert stats.horiz_dev.max() == pytest.approx(0.268292682926829, abs=1e-12)
    ref = grid_filter_stats(J.tolist())
    assert stats.horiz_dev.max() == pytest.approx(ref["max_horiz_dev"], abs=1e-14)
    assert stats.d_vert == pytest.approx(ref["d_vert"], abs=1e-14)


def test_rotated_angle_fails_at_ten_degrees():
    J = _grid(4, 4)
    J[0, 0] = (ANGLE_DELTA, ANGLE_DELTA)
    res, stats = grid_filter(J, (1, 1), LAM_D, LAM_ALPHA)
    assert not res.passed and res.reason == "angle"
    assert math.degrees(stats.angles[0]) == pytest.approx(105.0, abs=1e-9)
    assert math.degrees(stats.angle_dev.max()) == pytest.approx(15.0 * 8 / 9, abs=1e-9)
    # lengths alone would pass
    assert stats.vert_dev.max() < LAM_D and stats.horiz_dev.max() < LAM_D
    ref = grid_filter_stats(J.tolist())
    assert stats.angle_dev.max() == pytest.approx(ref["max_angle_dev"], abs=1e-14)
    # a looser angle bound accepts the same block
    assert grid_filter(J, (1, 1), LAM_D, math.radians(14.0))[0].passed


def test_boundary_fails():
    J = _grid(4, 4)
    for ij in [(0, 0), (0, 1), (1, 0), (2, 1), (1, 2), (3, 3)]:
        res, stats = grid_filter(J, ij, LAM_D, LAM_ALPHA)
        assert not res.passed and res.reason == "boundary" and stats is None


def test_mask_boundary_and_invalid_pixels():
    J = _grid(6, 6)
    mask = np.ones((6, 6), dtype=bool)
    mask[0, 0] = False
    assert grid_filter(J, (1, 1), LAM_D, LAM_ALPHA, mask)[0].reason == "boundary"
    assert grid_filter(J, (2, 2), LAM_D, LAM_ALPHA, mask)[0].passed
    J[4, 4] = np.nan
    assert grid_filter(J, (2, 2), LAM_D, LAM_ALPHA)[0].reason == "invalid-pixel"


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(-math.pi, math.pi), st.floats(-1e3, 1e3),
       st.floats(-1e3, 1e3), st.booleans())
def test_similarity_transforms_of_grids_pass(scale, theta, bx, by, mirror):
    c, s = math.cos(theta), math.sin(theta)
    A = scale * np.array([[c, -s], [s, c]]) @ np.diag([1.0, -1.0 if mirror else 1.0])
    J = _grid(4, 4, A, (bx, by))
    assert grid_filter(J, (1, 1), LAM_D, LAM_ALPHA)[0].passed


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_grid_stats_match_pure_python(seed):
    block = _grid(4, 4) + np.random.default_rng(seed).normal(0.0, 0.1, (4, 4, 2))
    stats = grid_stats(block)
    ref = grid_filter_stats(block.tolist())
    assert stats.d_vert == pytest.approx(ref["d_vert"], rel=1e-13)
    assert stats.d_horiz == pytest.approx(ref["d_horiz"], rel=1e-13)
    assert stats.vert_dev.max() == pytest.approx(ref["max_vert_dev"], abs=1e-12)
    assert stats.horiz_dev.max() == pytest.approx(ref["max_horiz_dev"], abs=1e-12)
    assert stats.angle_dev.max() == pytest.approx(ref["max_angle_dev"], abs=1e-12)


def test_grid_stats_work_in_3d():
    flat = _grid(4, 4)
    block = np.concatenate([flat, np.full((4, 4, 1), 7.0)], axis=-1)
    stats = grid_stats(block)
    assert stats.d_vert == 1.0 and stats.alpha == pytest.approx(math.pi / 2)


# --- search ------------------------------------------------------------------


def test_naive_search_first_minimum_row_major():
    J = np.zeros((3, 3, 2))
    J[...] = 5.0
    J[1, 2] = J[2, 0] = (0.1, 0.0)
    assert naive_search(J, (0.0, 0.0), 1.0) == (2, 1)
    assert naive_search(J, (0.0, 0.0), 0.1) is None  # strict inequality
    assert naive_search(J, (0.0, 0.0), 0.0) is None


def test_naive_search_respects_mask_and_nan():
    J = _grid(4, 4)
    J[1, 1] = np.nan
    assert naive_search(J, (1.0, 1.0), 2.0) in {(1, 0), (0, 1), (2, 1), (1, 2)}
    mask = np.zeros((4, 4), dtype=bool)
    mask[3, 3] = True
    assert naive_search(J, (0.0, 0.0), 10.0, mask) == (3, 3)


def test_local_spacing():
    J = _grid(5, 5, 2.0 * np.eye(2))
    assert local_spacing(J, (2, 2)) == 2.0
    assert local_spacing(J, (0, 0)) == 2.0
    J[2, 3] = np.nan
    assert local_spacing(J, (2, 2)) == 2.0


# --- interpolation -----------------------------------------------------------


def test_solve_st_examples():
    assert solve_st(np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                    np.array([0.25, 0.5])) == pytest.approx((0.25, 0.5))
    # 3D coplanar points in a tilted plane
    j0 = np.array([1.0, 2.0, 3.0])
    e1, e2 = np.array([1.0, 1.0, 0.0]), np.array([0.0, 1.0, 1.0])
    s, t = solve_st(j0, j0 + e1, j0 + e2, j0 + 0.3 * e1 - 0.2 * e2)
    assert (s, t) == pytest.approx((0.3, -0.2), abs=1e-14)
    with pytest.raises(DegenerateBasis):
        solve_st(np.zeros(2), np.array([1.0, 1.0]), np.array([2.0, 2.0]), np.ones(2))


def test_interpolate_corner_examples():
    A = np.array([[0.9, 0.2], [-0.1, 1.1]])
    J = _grid(6, 6, A, (3.0, -1.0))
    p = A @ (2.3, 3.6) + (3.0, -1.0)
    (x, y), s, t = interpolate_corner(J, (2, 3), p, K=1)
    assert (x, y) == pytest.approx((2.3, 3.6), abs=1e-12)
    assert (s, t) == pytest.approx((0.3, 0.6), abs=1e-12)
    (x, y), s, t = interpolate_corner(J, (3, 4), p, K=2, direction=(-1, -1))
    assert (x, y) == pytest.approx((1.15, 1.8), abs=1e-12)
    assert (s, t) == pytest.approx((0.7, 0.4), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 4.5), st.floats(0.5, 4.5), st.floats(-math.pi, math.pi),
       st.floats(0.2, 5.0))
def test_select_quad_finds_containing_quad(x, y, theta, scale):
    c, s = math.cos(theta), math.sin(theta)
    A = scale * np.array([[c, -s], [s, c]])
    J = _grid(6, 6, A)
    p = A @ (x, y)
    i, j = int(round(x)), int(round(y))
    direction, s_, t_, contained = select_quad(J, (i, j), p)
    assert contained
    assert 0 <= s_ <= 1 + 1e-9 and 0 <= t_ <= 1 + 1e-9
    assert (i + direction[0] * s_, j + direction[1] * t_) == pytest.approx((x, y), abs=1e-9)


def test_select_quad_reports_extrapolation():
    J = _grid(2, 2)
    direction, s, t, contained = select_quad(J, (0, 0), np.array([-0.5, 0.2]))
    assert not contained and direction == (1, 1) and s == pytest.approx(-0.5)


# --- microlens partition ------------------------------------------------------


def test_partition_without_mla_is_one_region():
    rig = presets.thin_lens_rig(size=8)
    part = split_microlens_images((16, 16), rig, K=2)
    assert part.lenses == [None] and np.all(part.labels == 0)


def test_partition_matches_brute_force():
    rig = presets.plenoptic_rig(size=24)
    K = 2
    part = split_microlens_images((48, 48), rig, K)
    for row in range(0, 48, 5):
        for col in range(0, 48, 3):
            x, y = rig.pixel_center(col, row, K)
            lens = HexIndex(*brute_nearest_hex((x, y), rig.mla.pitch))
            assert part.lenses[part.labels[row, col]] == lens
    # a window uses global pixel indices
    win = split_microlens_images((10, 12), rig, K, origin=(20, 30))
    for row in range(10):
        for col in range(12):
            assert win.lenses[win.labels[row, col]] == part.lenses[part.labels[30 + row, 20 + col]]


# --- driver on synthetic positional images ----------------------------------


def _synthetic(board, A, b, h=40, w=40):
    """Positional image whose pixel (i, j) sees board point A @ (i, j) + b."""
    return _grid(h, w, A, b)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.15, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_extract_recovers_affine_ground_truth(theta, scale, bx, by):
    board = make_checkerboard(4, 7, 1.0)
    c, s = math.cos(theta), math.sin(theta)
    A = scale * np.array([[c, -s], [s, c]])
    b = np.array([bx, by]) - A @ (20.0, 20.0) + (4.0, 2.5)
    J = _synthetic(board, A, b)
    rig = CameraRig(SensorSpec(40, 40, 0.01))
    part = split_microlens_images(J.shape[:2], rig)
    res = extract(J, board, ExtractionConfig(), part)
    assume(len(res.correspondences) == board.n_points)
    Ainv = np.linalg.inv(A)
    for corr in res.correspondences:
        expected = Ainv @ (board.points_uv[corr.k] - b)
        assert corr.pixel == pytest.approx(tuple(expected), abs=1e-9)
        assert corr.contained and corr.filter_passed is True and corr.lens is None


def test_extract_full_board_and_scale():
    board = make_checkerboard(4, 7, 1.0)
    A = 0.25 * np.eye(2)
    b = np.array([-0.6, -0.45])
    res = extract(_synthetic(board, A, b), board, ExtractionConfig(K=2),
                  split_microlens_images((40, 40), CameraRig(SensorSpec(20, 20, 0.01)), 2))
    assert len(res.correspondences) == 28 and not res.rejections
    first = res.correspondences[0]
    assert first.k == 0
    assert first.pixel == pytest.approx(((1.0 + 0.6) / 0.25 / 2, (1.0 + 0.45) / 0.25 / 2))
    np.testing.assert_allclose(first.world, board.points_of_interest[0])


def test_lambda_zero_yields_nothing_and_filter_switch():
    board = make_checkerboard(4, 7, 1.0)
    J = _synthetic(board, 0.25 * np.eye(2), (-0.6, -0.45))
    part = split_microlens_images((40, 40), CameraRig(SensorSpec(40, 40, 0.01)))
    assert extract(J, board, ExtractionConfig(lam=0.0), part).correspondences == []
    noisy = J + np.random.default_rng(1).normal(0.0, 0.05, J.shape)
    on = extract(noisy, board, ExtractionConfig(), part)
    off = extract(noisy, board, ExtractionConfig(filter_enabled=False), part)
    assert len(off.correspondences) > len(on.correspondences)
    assert all(c.filter_passed is None for c in off.correspondences)
    assert {r[2] for r in on.rejections} <= {"length", "angle", "boundary", "invalid-pixel", "no-quad"}


def test_extract_restricts_points_and_origin():
    board = make_checkerboard(4, 7, 1.0)
    J = _synthetic(board, 0.25 * np.eye(2), (-0.6, -0.45))
    part = split_microlens_images((40, 40), CameraRig(SensorSpec(40, 40, 0.01)))
    res = extract(J, board, ExtractionConfig(), part, origin=(100, 50), points=[3])
    assert [c.k for c in res.correspondences] == [3]
    full = extract(J, board, ExtractionConfig(), part).correspondences[3]
    got = res.correspondences[0].pixel
    assert got == pytest.approx((full.pixel[0] + 100, full.pixel[1] + 50))


def test_extraction_config_validation():
    for bad in (dict(K=0), dict(lam=-1.0), dict(lam_d=1.0), dict(lam_alpha=4.0),
                dict(method="magic")):
        with pytest.raises(ValueError):
            ExtractionConfig(**bad)


# --- two-plane method -----------------------------------------------------------


def test_positional_from_planes_hits_target_plane():
    rng = np.random.default_rng(3)
    near = np.concatenate([rng.normal(0, 1, (5, 5, 2)), np.full((5, 5, 1), -100.0)], axis=-1)
    far = np.concatenate([rng.normal(0, 3, (5, 5, 2)), np.full((5, 5, 1), -300.0)], axis=-1)
    plane = PlaneGeom.from_frame((0.0, 0.0, -200.0), (1.0, 0.0, 0.0), (0.0, 0.6, 0.8))
    pts = positional_from_planes(near, far, plane)
    np.testing.assert_allclose(plane.signed_distance(pts), 0.0, atol=1e-10)
    # the result lies on the near -> far line
    cross = np.cross(pts - near, far - near)
    np.testing.assert_allclose(cross, 0.0, atol=1e-9)
    near[0, 0] = np.nan
    assert np.isnan(positional_from_planes(near, far, plane)[0, 0]).all()


def test_parallel_ray_gives_nan():
    near = np.array([[[0.0, 0.0, -1.0]]])
    far = np.array([[[1.0, 0.0, -1.0]]])
    plane = PlaneGeom.from_frame((0.0, 0.0, -5.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
    assert np.isnan(positional_from_planes(near, far, plane)).all()


def test_pixel_ray():
    near = np.array([[[0.0, 0.0, -1.0]]])
    far = np.array([[[0.0, 1.0, -2.0]]])
    ray = pixel_ray(near, far, (0, 0))
    np.testing.assert_allclose(ray.origin, near[0, 0])
    np.testing.assert_allclose(ray.dir, np.array([0.0, 1.0, -1.0]) / math.sqrt(2))
    assert pixel_ray(np.full_like(near, np.nan), far, (0, 0)) is None
    with pytest.raises(ValueError):
        pixel_ray(near, near, (0, 0))


# --- comparison ---------------------------------------------------------------


def _corr(k, px, lens=None):
    return Correspondence(k=k, lens=lens, pixel=px, world=np.zeros(3), board_uv=np.zeros(2))


def test_compare_identical_lists():
    a = [_corr(k, (k * 1.0, 2.0)) for k in range(5)]
    rep = compare_correspondences(a, a)
    assert rep["matched"] == 5 and rep["mean_abs_diff_px"] == 0.0 and rep["sem_px"] == 0.0
    assert rep["ratio_matched_to_a"] == 1.0


def test_compare_known_offsets():
    a = [_corr(k, (0.0, 0.0)) for k in range(4)]
    b = [_corr(k, (0.3 * k, 0.4 * k)) for k in range(3)] + [_corr(9, (0.0, 0.0))]
    rep = compare_correspondences(a, b)
    d = np.array([0.0, 0.5, 1.0])
    assert rep["matched"] == 3
    assert rep["mean_abs_diff_px"] == pytest.approx(0.5)
    assert rep["sem_px"] == pytest.approx(d.std(ddof=1) / math.sqrt(3))
    assert rep["max_abs_diff_px"] == pytest.approx(1.0)
    assert rep["ratio_matched_to_a"] == 0.75 and rep["ratio_b_to_a"] == 1.0


def test_compare_keys_include_lens():
    a = [_corr(0, (0.0, 0.0), HexIndex(1, 2))]
    b = [_corr(0, (0.0, 0.0), HexIndex(2, 1))]
    rep = compare_correspondences(a, b)
    assert rep["matched"] == 0 and math.isnan(rep["mean_abs_diff_px"])
    assert compare_correspondences([], [])["matched"] == 0


def test_lens_type_of_correspondence():
    assert _corr(0, (0, 0), HexIndex(4, 1)).lens_type == 0
    assert _corr(0, (0, 0), HexIndex(2, 1)).lens_type == 1
    assert _corr(0, (0, 0)).lens_type is None
