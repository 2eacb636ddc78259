"""Ready-made rigs and scenes used by the experiments, configs and acceptance tests.

``pinhole_rig``
    Conventional camera degenerated to a pinhole: a single weak surface with
    a point stop in its scene-side focal plane, so every pixel sees exactly
    one world ray and the analytic pinhole projection is exact.
``thin_lens_rig``
    Conventional camera with a thin biconvex f = 50 mm lens and an open stop
    inside it, focused on a plane ``focus_distance`` in front of the lens.
``plenoptic_rig``
    Multifocus plenoptic camera with a biconvex stand-in objective focused
    behind the MLA (virtual depth about 5) and a 4 degree diffusor.
"""

from __future__ import annotations

import math

import numpy as np

from .camera import (
    ApertureStop,
    CameraRig,
    MlaSpec,
    ObjectiveSpec,
    SensorSpec,
    paraxial_cardinal_points,
)
from .optics import SphericalSurface
from .scene import Pose, ProxyPlanePair, make_checkerboard

GRAY = (0.5, 0.5, 0.5)


def pinhole_rig(size: int = 256, stop_radius: float = 1e-3) -> CameraRig:
    surface = SphericalSurface(0.0, -500.0, 5.0, 1.5, 1.0)
    return CameraRig(SensorSpec(size, size, 0.01),
                     MlaSpec(enabled=False, distance_to_sensor=1.0),
                     ObjectiveSpec((surface,), ApertureStop(1000.0, stop_radius), 9.0))


PINHOLE_POSES = (
    Pose((0.3, -0.2, -11010.0), (10.0, -15.0, 5.0)),
    Pose((-1.0, 0.5, -9010.0), (-20.0, 10.0, 0.0)),
    Pose((0.5, 1.0, -13010.0), (5.0, 25.0, -10.0)),
    Pose((0.0, 0.0, -10010.0), (30.0, 0.0, 45.0)),
)


def pinhole_board(pose_index: int = 0):
    return make_checkerboard(4, 7, 2.5, PINHOLE_POSES[pose_index])


_THIN_R, _THIN_T, _THIN_N = 51.5, 2.0, 1.5168


def thin_lens_rig(size: int = 256, stop_radius: float = 2.0, diffusor_deg: float = 3.0,
                  focus_distance: float = 1000.0) -> CameraRig:
    """Sensor placed on the image plane conjugate to ``focus_distance`` (mm from
    the scene-side principal plane)."""
    surfaces = (SphericalSurface(0.0, _THIN_R, 10.0, 1.0, _THIN_N),
                SphericalSurface(_THIN_T, -_THIN_R, 10.0, _THIN_N, 1.0))
    stop = ApertureStop(_THIN_T / 2, stop_radius)
    sensor = SensorSpec(size, size, 0.01, math.radians(diffusor_deg), "uniform-cone")
    mla = MlaSpec(enabled=False, distance_to_sensor=1.0)
    probe = CameraRig(sensor, mla, ObjectiveSpec(surfaces, stop, 0.0))
    cp = paraxial_cardinal_points(probe)
    f = cp["efl"]
    image_distance = 1.0 / (1.0 / f - 1.0 / focus_distance)
    # the probe has distance_to_mla = 0, so shifting by dist moves the principal plane to image_distance
    dist = image_distance - cp["sensor_principal_z"]
    return CameraRig(sensor, mla, ObjectiveSpec(surfaces, stop, dist))


def thin_lens_focus_z(rig: CameraRig, focus_distance: float = 1000.0) -> float:
    """World z of the in-focus plane of :func:`thin_lens_rig`."""
    return -(paraxial_cardinal_points(rig)["scene_principal_z"] + focus_distance)


def thin_lens_poses(rig: CameraRig) -> tuple:
    z = thin_lens_focus_z(rig)
    return (
        Pose((0.3, -0.2, z), (10.0, -15.0, 5.0)),
        Pose((-1.0, 0.5, z + 60.0), (-20.0, 10.0, 0.0)),
        Pose((0.5, 1.0, z - 40.0), (5.0, 12.0, -10.0)),
        Pose((-0.5, -1.0, z + 30.0), (-8.0, -5.0, 20.0)),
        Pose((0.0, 0.0, z - 20.0), (30.0, 0.0, 45.0)),
    )


def thin_lens_boards(rig: CameraRig) -> list:
    return [make_checkerboard(4, 7, 5.0, pose) for pose in thin_lens_poses(rig)]


def thin_lens_planes(rig: CameraRig) -> ProxyPlanePair:
    depth = -thin_lens_focus_z(rig)
    return ProxyPlanePair.at_depths(depth - 200.0, depth + 250.0)


def plenoptic_rig(size: int = 64, diffusor_deg: float = 4.0) -> CameraRig:
    R, t, n = 103.4, 6.0, 1.5168
    objective = ObjectiveSpec((SphericalSurface(0.0, R, 12.0, 1.0, n),
                               SphericalSurface(t, -R, 12.0, n, 1.0)),
                              ApertureStop(t / 2, 6.8), 123.3)
    sensor = SensorSpec(size, size, 0.0085, math.radians(diffusor_deg), "uniform-cone")
    return CameraRig(sensor, MlaSpec(enabled=True), objective)


PLENOPTIC_POSE = Pose((0.05, -0.03, -527.9), (8.0, -6.0, 3.0))


def plenoptic_board(pose: Pose = PLENOPTIC_POSE):
    return make_checkerboard(4, 7, 0.4, pose, background=GRAY)


def as_config(rig: CameraRig) -> dict:
    """``camera`` section of a run configuration describing ``rig``."""
    s, m, o = rig.sensor, rig.mla, rig.objective
    cam = {
        "sensor": {"width_px": s.width_px, "height_px": s.height_px,
                   "pixel_pitch": s.pixel_pitch,
                   "diffusor_max_angle_deg": round(math.degrees(s.diffusor_max_angle), 9),
                   "diffusor_distribution": s.diffusor_distribution.value},
        "mla": {"enabled": m.enabled, "distance_to_sensor": m.distance_to_sensor,
                "pitch": m.pitch, "thickness": m.thickness, "ior": m.ior,
                "lens_radii": list(m.lens_radii), "origin_offset": list(m.origin_offset),
                "gap_passthrough": m.gap_passthrough,
                "require_focal_beyond_sensor": m.require_focal_beyond_sensor},
        "objective": {
            "distance_to_mla": o.distance_to_mla,
            "surfaces": [{"z": x.axial_position,
                          "radius": None if np.isinf(x.radius) else x.radius,
                          "aperture_radius": x.aperture_radius,
                          "ior_before": x.ior_before, "ior_after": x.ior_after}
                         for x in o.surfaces],
        },
    }
    if o.aperture_stop is not None:
        cam["objective"]["aperture_stop"] = {"z": o.aperture_stop.axial_position,
                                             "radius": o.aperture_stop.radius}
    return cam
