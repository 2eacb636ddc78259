import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import single_surface_paraxial, thin_lens_focus
from plenogt import presets
from plenogt.camera import (
    BlockReason,
    CameraRig,
    MlaSpec,
    SensorSpec,
    generate_pixel_samples,
    paraxial_cardinal_points,
    paraxial_system,
    trace_many,
    trace_pixel,
    trace_sensor_rays_fast,
)
from plenogt.optics import microlens_type


def _bare(diff_deg=0.0, dist="uniform-cone", mla=None, size=8):
    sensor = SensorSpec(size, size, 0.01, math.radians(diff_deg), dist)
    return CameraRig(sensor, mla or MlaSpec())


def _cone_angles(dirs):
    return np.degrees(np.arccos(np.clip(dirs[:, 2], -1.0, 1.0)))


# --- sensor sampling -------------------------------------------------------


def test_samples_are_deterministic():
    rig = _bare(5.0)
    a = generate_pixel_samples(rig, (3, 4), 100, seed=7)
    b = generate_pixel_samples(rig, (3, 4), 100, seed=7)
    c = generate_pixel_samples(rig, (3, 4), 100, seed=8)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(a[1], c[1])


def test_samples_stay_in_pixel_footprint():
    rig = _bare(0.0)
    for K in (1, 3):
        o, d = generate_pixel_samples(rig, (5, 2), 256, seed=1, scale=K)
        x0, y0 = rig.pixel_center(5, 2, K)
        half = 0.5 * rig.sensor.pixel_pitch / K
        assert np.all(np.abs(o[:, 0] - x0) <= half + 1e-15)
        assert np.all(np.abs(o[:, 1] - y0) <= half + 1e-15)
        assert np.all(o[:, 2] == 0.0)
        np.testing.assert_array_equal(d, np.tile([0.0, 0.0, 1.0], (256, 1)))


def test_stratified_origins_cover_every_stratum():
    rig = _bare(0.0)
    o, _ = generate_pixel_samples(rig, (0, 0), 16, seed=3)
    x0, y0 = rig.pixel_center(0, 0)
    pitch = rig.sensor.pixel_pitch
    cells = {(int((x - x0) / pitch * 4 + 2), int((y - y0) / pitch * 4 + 2)) for x, y, _ in o}
    assert len(cells) == 16


def test_uniform_cone_statistics():
    rig = _bare(10.0, "uniform-cone")
    _, d = generate_pixel_samples(rig, (1, 1), 10 ** 6, seed=11)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)
    ang = _cone_angles(d)
    assert ang.max() <= 10.0 + 1e-9
    cmax = math.cos(math.radians(10.0))
    # cos(theta) uniform on [cos 10deg, 1]
    assert d[:, 2].mean() == pytest.approx((1 + cmax) / 2, abs=5 * (1 - cmax) / math.sqrt(12e6))
    assert abs(d[:, 0].mean()) < 1e-3 and abs(d[:, 1].mean()) < 1e-3
    phi = np.arctan2(d[:, 1], d[:, 0])
    hist, _ = np.histogram(phi, bins=8, range=(-math.pi, math.pi))
    assert np.all(np.abs(hist / len(phi) - 1 / 8) < 3e-3)


def test_cosine_cone_statistics():
    rig = _bare(10.0, "cosine-cone")
    _, d = generate_pixel_samples(rig, (2, 1), 10 ** 6, seed=12)
    s2 = 1.0 - d[:, 2] ** 2
    smax2 = math.sin(math.radians(10.0)) ** 2
    assert s2.max() <= smax2 * (1 + 1e-9)
    # sin^2(theta) uniform on [0, sin^2 max]
    assert s2.mean() == pytest.approx(smax2 / 2, rel=3e-3)


def test_zero_angle_diffusor_is_collimated():
    for dist in ("uniform-cone", "cosine-cone", "none"):
        _, d = generate_pixel_samples(_bare(0.0, dist), (0, 0), 64, seed=1)
        assert np.all(d[:, 2] == 1.0)


# --- microlens array -------------------------------------------------------


def _lens_with_type(t):
    for i in range(3):
        if microlens_type((i, 0)) == t:
            return (i, 0)


@pytest.mark.parametrize("t, f_expected", [(0, 1.9), (1, 2.1), (2, 2.3)])
def test_microlens_focal_length(t, f_expected):
    mla = MlaSpec(enabled=True)
    assert thin_lens_focus(mla.lens_radii[t], mla.ior) == pytest.approx(f_expected, rel=1e-12)
    rig = CameraRig(SensorSpec(8, 8, 0.01), mla)
    c = mla.lens_center(_lens_with_type(t))
    h = 1e-4
    o = np.array([[c[0] + h, c[1], 0.0], [c[0], c[1] - h, 0.0]])
    d = np.tile([0.0, 0.0, 1.0], (2, 1))
    _, wd, status = trace_many(rig, o, d)
    assert np.all(status == 0)
    # world frame flips y and z; slope towards the axis gives f = h / |slope|
    f_x = h / abs(wd[0, 0] / wd[0, 2])
    f_y = h / abs(wd[1, 1] / wd[1, 2])
    assert f_x == pytest.approx(f_expected, rel=0.01)
    assert f_y == pytest.approx(f_expected, rel=0.01)
    assert wd[0, 0] < 0 and wd[1, 1] < 0


def test_mla_gap_blocks_and_passthrough():
    mla = MlaSpec(enabled=True)
    gap = mla.lens_center((0, 0)) + np.array([0.5 * mla.pitch * 0.999, 0.5 * mla.pitch * 0.6])
    o = np.array([[gap[0], gap[1], 0.0]])
    d = np.array([[0.0, 0.0, 1.0]])
    _, _, status = trace_many(CameraRig(SensorSpec(8, 8, 0.01), mla), o, d)
    assert status[0] == BlockReason.MLA_GAP
    open_mla = MlaSpec(enabled=True, gap_passthrough=True)
    wo, wd, status = trace_many(CameraRig(SensorSpec(8, 8, 0.01), open_mla), o, d)
    assert status[0] == 0
    np.testing.assert_allclose(wd[0], [0.0, 0.0, -1.0], atol=1e-15)


def test_mla_validation():
    with pytest.raises(ValueError):
        MlaSpec(enabled=True, pitch=-1.0)
    with pytest.raises(ValueError):
        MlaSpec(enabled=True, lens_radii=(0.1,))
    with pytest.raises(ValueError):
        MlaSpec(enabled=True, distance_to_sensor=2.0)  # f = 1.9 < 2.0
    MlaSpec(enabled=True, distance_to_sensor=2.0, require_focal_beyond_sensor=False)


# --- objective ---------------------------------------------------------------


def test_single_surface_paraxial_matches_oracle():
    rig = presets.pinhole_rig()
    efl, bfz = paraxial_system(rig)
    f_after, z_focus = single_surface_paraxial(-500.0, 1.5, 1.0, rig.objective_origin)
    assert efl == pytest.approx(f_after, rel=1e-12)
    assert bfz == pytest.approx(z_focus, rel=1e-12)
    assert efl == pytest.approx(1000.0)


def test_cardinal_points_of_thin_lens():
    rig = presets.thin_lens_rig()
    cp = paraxial_cardinal_points(rig)
    # lensmaker for a thick biconvex lens, computed by hand
    n, R, t = 1.5168, 51.5, 2.0
    phi = (n - 1) * (2 / R - (n - 1) * t / (n * R * R))
    assert cp["efl"] == pytest.approx(1 / phi, rel=1e-12)
    assert cp["scene_nodal_z"] == pytest.approx(cp["scene_principal_z"])
    # principal planes are symmetric about the lens centre
    mid = rig.objective_origin + t / 2
    assert cp["scene_principal_z"] - mid == pytest.approx(mid - cp["sensor_principal_z"], rel=1e-9)
    # sensor on the conjugate of the 1 m plane
    b, g = cp["sensor_principal_z"], 1000.0
    assert 1 / b + 1 / g == pytest.approx(1 / cp["efl"], rel=1e-12)


def test_real_trace_focuses_parallel_rays():
    rig = presets.thin_lens_rig(diffusor_deg=0.0)
    cp = paraxial_cardinal_points(rig)
    h = 1e-3
    o = np.array([[h, 0.0, 0.0]])
    wo, wd, status = trace_many(rig, o, np.array([[0.0, 0.0, 1.0]]))
    assert status[0] == 0
    t = -wo[0, 0] / wd[0, 0]
    z_cross = -(wo[0, 2] + t * wd[0, 2])
    assert z_cross == pytest.approx(cp["scene_focal_z"], rel=1e-5)


def test_stop_blocks_outside_rays():
    rig = presets.thin_lens_rig(diffusor_deg=0.0)
    o = np.array([[0.0, 0.0, 0.0], [2.5, 0.0, 0.0], [0.0, -1.9, 0.0]])
    _, _, status = trace_many(rig, o, np.tile([0.0, 0.0, 1.0], (3, 1)))
    assert list(status) == [0, BlockReason.STOP, 0]


def test_closed_stop_blocks_everything():
    rig = presets.thin_lens_rig(stop_radius=0.0)
    batch = trace_pixel(rig, (128, 128), 64, seed=1)
    assert len(batch.origins) == 0 and batch.blocked_count == 64
    assert np.all(batch.reasons == BlockReason.STOP)


def test_accounting_adds_up():
    rig = presets.plenoptic_rig()
    batch = trace_pixel(rig, (20, 30), 500, seed=4)
    assert batch.requested == 500
    assert len(batch.origins) + np.count_nonzero(batch.reasons) == 500
    assert 0 < len(batch.origins) < 500


@pytest.mark.parametrize("make", [presets.pinhole_rig, presets.thin_lens_rig, presets.plenoptic_rig])
def test_kernel_tracer_matches_numpy(make):
    rig = make()
    o, d = generate_pixel_samples(rig, (10, 12), 2000, seed=5)
    a = trace_many(rig, o, d)
    b = trace_sensor_rays_fast(rig, o, d)
    np.testing.assert_array_equal(a[2], b[2])
    ok = a[2] == 0
    np.testing.assert_allclose(a[0][ok], b[0][ok], rtol=0, atol=1e-9)
    np.testing.assert_allclose(a[1][ok], b[1][ok], rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_traced_directions_are_unit(x, y):
    rig = presets.thin_lens_rig()
    o, d = generate_pixel_samples(rig, (0, 0), 32, seed=2)
    o = o + np.array([x, y, 0.0])
    _, wd, status = trace_many(rig, o, d)
    ok = status == 0
    np.testing.assert_allclose(np.linalg.norm(wd[ok], axis=1), 1.0, atol=1e-12)
    assert np.all(wd[ok, 2] < 0)


def test_fingerprint_tracks_geometry():
    a, b = presets.thin_lens_rig(), presets.thin_lens_rig()
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != presets.thin_lens_rig(stop_radius=1.0).fingerprint()
    assert len(a.fingerprint()) == 16


def test_pixel_center_round_trip():
    rig = _bare(size=16)
    for K in (1, 2, 5):
        x, y = rig.pixel_center(7.0, 3.0, K)
        u, v = rig.sensor_to_pixel(x, y, K)
        assert u == pytest.approx(7.0) and v == pytest.approx(3.0)
    # pixel (cx, cy) sits on the axis, image is upright
    cx, cy = rig.sensor.principal_point
    assert rig.pixel_center(cx, cy) == (0.0, 0.0)
    assert rig.pixel_center(cx + 1, cy)[0] < 0
