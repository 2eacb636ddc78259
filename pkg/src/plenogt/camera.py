"""Camera rig: orthographic sensor + diffusor, optional multifocus MLA, objective.

Frames
------
Camera frame: x right, y down, z along the optical axis from the sensor
(z = 0) towards the scene. Backward-traced rays travel towards +z.

World frame: the camera sits at the origin looking down -z with y up, so a
camera-frame vector (x, y, z) is (x, -y, -z) in world coordinates.

Pixels: i = column, j = row, pixel centres on integer coordinates, origin at
the top-left pixel centre. Pixel (i, j) of a render at scale K covers the
sensor square centred on base-resolution coordinate (i / K, j / K) with side
pitch / K. The image is upright: sensor x = -(u - cx) * pitch.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .optics import (
    HexIndex,
    Ray,
    SphericalSurface,
    intersect_plane_many,
    microlens_type,
    nearest_lens_centers,
    refract_many,
    sphere_hits_many,
    SQRT3_2,
)


class BlockReason(enum.IntEnum):
    MLA_GAP = K.MLA_GAP
    STOP = K.STOP
    MOUNT = K.MOUNT
    TIR = K.TIR


class Diffusor(str, enum.Enum):
    UNIFORM_CONE = "uniform-cone"
    COSINE_CONE = "cosine-cone"
    NONE = "none"


_DIFF_MODE = {Diffusor.NONE: K.DIFF_NONE, Diffusor.UNIFORM_CONE: K.DIFF_UNIFORM,
              Diffusor.COSINE_CONE: K.DIFF_COSINE}


@dataclass(frozen=True)
class SensorSpec:
    width_px: int
    height_px: int
    pixel_pitch: float
    diffusor_max_angle: float = 0.0
    diffusor_distribution: Diffusor = Diffusor.UNIFORM_CONE

    def __post_init__(self):
        object.__setattr__(self, "diffusor_distribution", Diffusor(self.diffusor_distribution))
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("sensor resolution must be positive")
        if not self.pixel_pitch > 0:
            raise ValueError("pixel_pitch must be > 0")
        if not 0.0 <= self.diffusor_max_angle < math.pi / 2:
            raise ValueError("diffusor_max_angle must lie in [0, pi/2)")

    @property
    def width_mm(self) -> float:
        return self.width_px * self.pixel_pitch

    @property
    def height_mm(self) -> float:
        return self.height_px * self.pixel_pitch

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.width_px - 1) / 2.0, (self.height_px - 1) / 2.0

    def diffusor_params(self) -> tuple[int, float]:
        mode = _DIFF_MODE[self.diffusor_distribution]
        if self.diffusor_max_angle == 0.0:
            mode = K.DIFF_NONE
        if mode == K.DIFF_UNIFORM:
            return mode, math.cos(self.diffusor_max_angle)
        if mode == K.DIFF_COSINE:
            return mode, math.sin(self.diffusor_max_angle) ** 2
        return mode, 0.0


@dataclass(frozen=True)
class MlaSpec:
    enabled: bool = False
    distance_to_sensor: float = 1.7
    pitch: float = 0.2173
    thickness: float = 0.0
    ior: float = 1.5
    lens_radii: tuple = (0.95, 1.05, 1.15)
    origin_offset: tuple = (0.0, 0.0)
    gap_passthrough: bool = False
    require_focal_beyond_sensor: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lens_radii", tuple(float(r) for r in self.lens_radii))
        object.__setattr__(self, "origin_offset", tuple(float(v) for v in self.origin_offset))
        if not self.distance_to_sensor > 0:
            raise ValueError("mla.distance_to_sensor must be > 0")
        if not self.enabled:
            return
        if not self.pitch > 0:
            raise ValueError("mla.pitch must be > 0")
        if not self.ior > 1:
            raise ValueError("mla.ior must be > 1")
        if len(self.lens_radii) not in (1, 3):
            raise ValueError("mla.lens_radii needs one or three radii")
        for r in self.lens_radii:
            if not r > 0.5 * self.pitch:
                raise ValueError("mla lens radius must exceed half the pitch")
        if not 0 <= self.thickness < self.distance_to_sensor:
            raise ValueError("mla.thickness must lie in [0, distance_to_sensor)")
        if self.require_focal_beyond_sensor:
            for f in self.focal_lengths:
                if not f > self.distance_to_sensor:
                    raise ValueError("microlens focal length must exceed the MLA-sensor distance")

    def radius_for(self, idx) -> float:
        if len(self.lens_radii) == 1:
            return self.lens_radii[0]
        return self.lens_radii[microlens_type(idx)]

    @property
    def focal_lengths(self) -> tuple:
        return tuple(r / (self.ior - 1.0) for r in self.lens_radii)

    def lens_center(self, idx) -> np.ndarray:
        i, j = idx
        return np.array([self.origin_offset[0] + i * self.pitch + j * 0.5 * self.pitch,
                         self.origin_offset[1] + j * SQRT3_2 * self.pitch])

    def packed(self) -> np.ndarray:
        out = np.zeros(K.MLA_NPARAMS)
        radii = self.lens_radii * (3 if len(self.lens_radii) == 1 else 1)
        out[K.MLA_ENABLED] = float(self.enabled)
        out[K.MLA_DIST] = self.distance_to_sensor
        out[K.MLA_PITCH] = self.pitch
        out[K.MLA_IOR] = self.ior
        out[K.MLA_OFFX], out[K.MLA_OFFY] = self.origin_offset
        out[K.MLA_R0:K.MLA_R2 + 1] = radii[:3]
        out[K.MLA_PASS] = float(self.gap_passthrough)
        out[K.MLA_NRADII] = float(len(self.lens_radii))
        return out


@dataclass(frozen=True)
class ApertureStop:
    axial_position: float
    radius: float


@dataclass(frozen=True)
class ObjectiveSpec:
    """Surfaces and stop; axial positions are relative to the objective origin,
    which sits ``distance_to_mla`` beyond the MLA plane."""

    surfaces: tuple = ()
    aperture_stop: Optional[ApertureStop] = None
    distance_to_mla: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        pos = [s.axial_position for s in self.surfaces]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("objective surfaces must be strictly ordered by axial position")
        if self.aperture_stop is not None and self.aperture_stop.radius < 0:
            raise ValueError("aperture stop radius must be >= 0")
        if self.distance_to_mla < 0:
            raise ValueError("objective.distance_to_mla must be >= 0")


@dataclass(frozen=True)
class CameraRig:
    sensor: SensorSpec
    mla: MlaSpec = field(default_factory=MlaSpec)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)

    @property
    def objective_origin(self) -> float:
        return self.mla.distance_to_sensor + self.objective.distance_to_mla

    def element_table(self) -> np.ndarray:
        """Objective surfaces and stop sorted by absolute axial position."""
        z0 = self.objective_origin
        rows = [(K.ELEM_SURFACE, z0 + s.axial_position, s.curvature, s.aperture_radius,
                 s.ior_before, s.ior_after, s.ior_before / s.ior_after)
                for s in self.objective.surfaces]
        stop = self.objective.aperture_stop
        if stop is not None:
            rows.append((K.ELEM_STOP, z0 + stop.axial_position, 0.0, stop.radius, 1.0, 1.0, 1.0))
        rows.sort(key=lambda r: (r[1], r[0]))
        return np.array(rows, dtype=np.float64).reshape(-1, 7)

    def pixel_center(self, col: float, row: float, scale: int = 1) -> tuple[float, float]:
        """Sensor-plane centre (camera frame) of pixel (col, row) at render scale."""
        cx, cy = self.sensor.principal_point
        p = self.sensor.pixel_pitch
        return -(col / scale - cx) * p, -(row / scale - cy) * p

    def sensor_to_pixel(self, x, y, scale: int = 1):
        cx, cy = self.sensor.principal_point
        p = self.sensor.pixel_pitch
        return (cx - np.asarray(x) / p) * scale, (cy - np.asarray(y) / p) * scale

    def fingerprint(self) -> str:
        """Short stable hash of the full optical description."""
        text = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def kernel_args(self):
        mode, param = self.sensor.diffusor_params()
        return mode, param, self.mla.packed(), self.element_table()


@dataclass
class SampleBatch:
    pixel: tuple
    origins: np.ndarray
    dirs: np.ndarray
    blocked_count: int
    reasons: np.ndarray

    @property
    def rays_world(self) -> list:
        return [Ray(o, d) for o, d in zip(self.origins, self.dirs)]

    @property
    def requested(self) -> int:
        return len(self.origins) + self.blocked_count


def generate_pixel_samples(rig: CameraRig, pixel, n: int, seed: int, scale: int = 1):
    """Sensor-side rays of one pixel as ``(origins, dirs)`` in the camera frame.

    Origins are stratified over the pixel footprint on the diffusor plane;
    directions follow the diffusor distribution. Identical to the samples the
    render kernels draw for the same (seed, pixel, scale).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    col, row = pixel
    x0, y0 = rig.pixel_center(col, row, scale)
    mode, param = rig.sensor.diffusor_params()
    raw = K.pixel_samples(seed, scale, rig.sensor.width_px * scale, col, row, n, x0, y0,
                          rig.sensor.pixel_pitch / scale, mode, param)
    origins = np.column_stack([raw[:, 0], raw[:, 1], np.zeros(n)])
    return origins, raw[:, 2:5].copy()


def _to_world(v: np.ndarray) -> np.ndarray:
    return v * np.array([1.0, -1.0, -1.0])


def trace_many(rig: CameraRig, origins, dirs):
    """Vectorised reference tracer (numpy). Returns world ``(origins, dirs, status)``.

    ``status`` is 0 for rays leaving the camera, otherwise a :class:`BlockReason`.
    """
    o = np.array(origins, dtype=np.float64, copy=True).reshape(-1, 3)
    d = np.array(dirs, dtype=np.float64, copy=True).reshape(-1, 3)
    status = np.zeros(len(o), dtype=np.int8)
    mla = rig.mla
    if mla.enabled:
        alive = d[:, 2] > 0
        status[~alive] = BlockReason.MLA_GAP
        t, p, ok = intersect_plane_many(o, d, (0.0, 0.0, mla.distance_to_sensor), (0.0, 0.0, 1.0))
        o = np.where(alive[:, None], p, o)
        ci, cj = nearest_lens_centers(o[:, :2], mla.pitch, mla.origin_offset)
        centers = np.column_stack([mla.origin_offset[0] + ci * mla.pitch + cj * 0.5 * mla.pitch,
                                   mla.origin_offset[1] + cj * SQRT3_2 * mla.pitch])
        off = o[:, :2] - centers
        inside = np.sum(off * off, axis=1) <= 0.25 * mla.pitch ** 2
        if not mla.gap_passthrough:
            status[alive & ~inside] = BlockReason.MLA_GAP
        lensed = alive & inside
        radii = np.array(mla.lens_radii * (3 if len(mla.lens_radii) == 1 else 1))
        radius = radii[(ci - cj) % 3]
        d1, ok1 = refract_many(d, np.array([0.0, 0.0, -1.0]), 1.0, mla.ior)
        h = np.sqrt(np.maximum(radius ** 2 - np.sum(off * off, axis=1), 0.0))
        normal = np.column_stack([off, h]) / radius[:, None]
        d2, ok2 = refract_many(np.where(ok1[:, None], d1, d), normal, mla.ior, 1.0)
        tir = lensed & ~(ok1 & ok2)
        status[tir & (status == 0)] = BlockReason.TIR
        d = np.where((lensed & ~tir)[:, None], d2, d)
    z = o[:, 2]
    for kind, zv, curv, ap, n1, n2, _ in rig.element_table():
        live = status == 0
        if not live.any():
            break
        if kind == K.ELEM_STOP:
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (zv - z) / d[:, 2]
            bad = live & ~(np.isfinite(t) & (t >= 0))
            status[bad] = BlockReason.STOP
            live = status == 0
            p = o + np.where(live, t, 0.0)[:, None] * d
            o = np.where(live[:, None], p, o)
            z = o[:, 2]
            r2 = np.sum(o[:, :2] ** 2, axis=1)
            status[live & ((ap <= 0) | (r2 > ap * ap))] = BlockReason.STOP
            continue
        surf = _RawSurface(zv, curv, ap)
        t, p, nrm, hit, blocked = sphere_hits_many(o, d, surf)
        status[live & (~hit | blocked)] = BlockReason.MOUNT
        live = status == 0
        o = np.where(live[:, None], p, o)
        z = o[:, 2]
        dn, ok = refract_many(d, np.where(live[:, None], nrm, np.array([0.0, 0.0, -1.0])), n1, n2)
        status[live & ~ok] = BlockReason.TIR
        live = status == 0
        d = np.where(live[:, None], dn, d)
    return _to_world(o), _to_world(d), status


@dataclass(frozen=True)
class _RawSurface:
    # duck-typed stand-in for SphericalSurface inside the reference tracer
    axial_position: float
    curvature: float
    aperture_radius: float


def trace_through_camera(rig: CameraRig, sensor_ray: Ray):
    """Trace one sensor ray; returns the world-space :class:`Ray` or a :class:`BlockReason`."""
    o, d, status = trace_many(rig, sensor_ray.origin[None], sensor_ray.dir[None])
    if status[0]:
        return BlockReason(int(status[0]))
    return Ray(o[0], d[0])


def trace_pixel(rig: CameraRig, pixel, n: int, seed: int, scale: int = 1) -> SampleBatch:
    origins, dirs = generate_pixel_samples(rig, pixel, n, seed, scale)
    wo, wd, status = trace_many(rig, origins, dirs)
    ok = status == 0
    return SampleBatch(tuple(pixel), wo[ok], wd[ok], int(np.count_nonzero(~ok)), status)


def trace_sensor_rays_fast(rig: CameraRig, origins, dirs):
    """Same contract as :func:`trace_many` but through the compiled tracer."""
    mode, param, mla, elems = rig.kernel_args()
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    out = K.trace_batch(o, d, mla, elems)
    status = out[:, 0].astype(np.int8)
    return _to_world(out[:, 1:4]), _to_world(out[:, 4:7]), status


def lens_of_sensor_points(rig: CameraRig, xy) -> list:
    """HexIndex of the microlens whose sensor projection is nearest each point."""
    ci, cj = nearest_lens_centers(np.asarray(xy), rig.mla.pitch, rig.mla.origin_offset)
    return [HexIndex(int(a), int(b)) for a, b in zip(ci, cj)]


def paraxial_matrix(rig: CameraRig):
    """Reduced (y, n*u) transfer matrix of the objective from its first to its last vertex.

    Returns ``(M, z_first, z_last, n_first, n_last)``; z in camera-frame mm.
    """
    surfaces = sorted(rig.objective.surfaces, key=lambda s: s.axial_position)
    if not surfaces:
        raise ValueError("objective has no refracting surfaces")
    z0 = rig.objective_origin
    M = np.eye(2)
    z_prev, n_cur = z0 + surfaces[0].axial_position, surfaces[0].ior_before
    for s in surfaces:
        z = z0 + s.axial_position
        M = np.array([[1.0, (z - z_prev) / n_cur], [0.0, 1.0]]) @ M
        M = np.array([[1.0, 0.0], [-(s.ior_after - s.ior_before) * s.curvature, 1.0]]) @ M
        z_prev, n_cur = z, s.ior_after
    return M, z0 + surfaces[0].axial_position, z_prev, surfaces[0].ior_before, n_cur


def paraxial_cardinal_points(rig: CameraRig) -> dict:
    """Cardinal points of the objective in camera-frame z.

    ``sensor_*`` entries lie on the sensor side, ``scene_*`` on the scene side.
    ``efl`` is measured in the scene-side medium.
    """
    (A, B), (C, D) = paraxial_matrix(rig)[0]
    _, z1, z2, n1, n2 = paraxial_matrix(rig)
    if C == 0.0:
        raise ValueError("objective has no optical power")
    power = -C
    scene_focal = z2 - A * n2 / C
    sensor_focal = z1 + n1 * D / C
    scene_principal = scene_focal - n2 / power
    sensor_principal = sensor_focal + n1 / power
    shift = (n2 - n1) / power
    return {
        "efl": n2 / power,
        "scene_focal_z": scene_focal,
        "sensor_focal_z": sensor_focal,
        "scene_principal_z": scene_principal,
        "sensor_principal_z": sensor_principal,
        "scene_nodal_z": scene_principal + shift,
        "sensor_nodal_z": sensor_principal + shift,
    }


def paraxial_system(rig: CameraRig, height: float = 0.0):
    """Paraxial (y, n*u) trace of the objective for a ray parallel to the axis.

    Returns ``(effective_focal_length, back_focal_z)`` in the exit medium,
    both measured in camera-frame millimetres; used by the pinhole oracle.
    """
    surfaces = sorted(rig.objective.surfaces, key=lambda s: s.axial_position)
    if not surfaces:
        raise ValueError("objective has no refracting surfaces")
    z0 = rig.objective_origin
    y, nu = 1.0, 0.0
    z_prev = z0 + surfaces[0].axial_position
    n_cur = surfaces[0].ior_before
    for s in surfaces:
        z = z0 + s.axial_position
        y += (z - z_prev) * nu / n_cur
        power = (s.ior_after - s.ior_before) * s.curvature
        nu -= y * power
        n_cur = s.ior_after
        z_prev = z
    if nu == 0.0:
        raise ValueError("objective has no optical power")
    efl = -n_cur * 1.0 / nu
    bfl_z = z_prev - y * n_cur / nu
    return efl, bfl_z


__all__ = [
    "ApertureStop", "BlockReason", "CameraRig", "Diffusor", "MlaSpec", "ObjectiveSpec",
    "SampleBatch", "SensorSpec", "SphericalSurface", "generate_pixel_samples", "paraxial_cardinal_points",
    "paraxial_matrix", "paraxial_system",
    "trace_many", "trace_pixel", "trace_sensor_rays_fast", "trace_through_camera",
]
