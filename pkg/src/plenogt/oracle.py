"""Analytic central projection used as the reference for pinhole-mode rigs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraRig, paraxial_cardinal_points, paraxial_system

PINHOLE_STOP_RADIUS = 1e-3


@dataclass(frozen=True)
class PinholeOracle:
    """Pinhole at ``position`` (world mm), image plane at distance ``d`` behind it.

    Image axes follow the pixel convention: x right, y down, upright image.
    """

    position: tuple
    d: float
    pixel_pitch: float
    principal_point: tuple

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("image distance d must be > 0")
        if not self.pixel_pitch > 0:
            raise ValueError("pixel_pitch must be > 0")

    @classmethod
    def from_rig(cls, rig: CameraRig, strict: bool = True) -> "PinholeOracle":
        """Oracle for a rig whose stop has shrunk to a point.

        The pinhole is the stop centre; d is the objective's effective focal
        length, which maps sensor height h to ray slope h / f when the stop
        sits in the scene-side focal plane (sensor-side telecentric). With
        ``strict=False`` an open stop is accepted and the result is the paraxial
        chief-ray projection.
        """
        if rig.objective.aperture_stop is None:
            raise ValueError("rig has no aperture stop")
        if strict and not is_pinhole(rig):
            raise ValueError("rig is not in pinhole mode (stop radius, MLA off, no diffusor)")
        stop = rig.objective.aperture_stop
        z = rig.objective_origin + stop.axial_position
        efl, _ = paraxial_system(rig)
        return cls((0.0, 0.0, -z), abs(efl), rig.sensor.pixel_pitch, rig.sensor.principal_point)

    @classmethod
    def paraxial(cls, rig: CameraRig) -> "PinholeOracle":
        """Nodal-point projection of a focusing objective.

        The pinhole sits at the scene-side nodal point and the sensor lies at
        the distance of the sensor-side nodal point. Exact to first order for
        points on the plane conjugate to the sensor when the stop is centred
        on the nodal points, e.g. a thin lens with its stop in the lens.
        """
        cp = paraxial_cardinal_points(rig)
        if not cp["efl"] > 0:
            raise ValueError("objective is not converging")
        return cls((0.0, 0.0, -cp["scene_nodal_z"]), cp["sensor_nodal_z"], rig.sensor.pixel_pitch,
                   rig.sensor.principal_point)


def is_pinhole(rig: CameraRig) -> bool:
    stop = rig.objective.aperture_stop
    mode, _ = rig.sensor.diffusor_params()
    return (stop is not None and stop.radius <= PINHOLE_STOP_RADIUS and not rig.mla.enabled
            and mode == 0)


def pinhole_project(oracle: PinholeOracle, p) -> np.ndarray:
    """Pixel position(s) ``(x, y)`` of world point(s) ``p``; shape ``(..., 2)``."""
    rel = np.asarray(p, dtype=np.float64) - np.asarray(oracle.position, dtype=np.float64)
    xc, yc, zc = rel[..., 0], -rel[..., 1], -rel[..., 2]
    if np.any(np.abs(zc) < 1e-12):
        raise ValueError("point lies in the pinhole plane")
    scale = oracle.d / oracle.pixel_pitch
    cx, cy = oracle.principal_point
    return np.stack([cx + scale * xc / zc, cy + scale * yc / zc], axis=-1)
