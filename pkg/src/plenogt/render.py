"""Backward-traced colour, positional and proxy-plane renders.

Positional renders are packed the way a host renderer with emissive
materials would produce them: channels hold ``sum(u)/|R|``, ``sum(v)/|R|`` and
the ray proportion ``|R_hit|/|R|``. :func:`normalize_positional` divides the
first two by the third.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K
from .camera import CameraRig
from .optics import PlaneGeom
from .scene import PatternBoard, ProxyPlanePair


class Tag(str, enum.Enum):
    COLOR = "color"
    UV_POSITIONAL = "uvw-positional"
    PLANE_POSITIONAL = "plane-positional"
    RATIO = "ratio"


@dataclass
class FloatImage:
    data: np.ndarray
    tag: Tag = Tag.COLOR
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError("FloatImage needs shape (H, W, 1|3)")
        self.data = data
        self.tag = Tag(self.tag)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class RenderJob:
    rig: CameraRig
    target: Union[PatternBoard, PlaneGeom]
    K: int = 1
    samples: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rig.sensor.height_px * self.K, self.rig.sensor.width_px * self.K


def _plane_row(plane: PlaneGeom) -> np.ndarray:
    if not plane.has_frame:
        raise ValueError("positional targets need a (u, v) frame")
    g = plane._gram_inv
    return np.concatenate([plane.q, plane.n, plane.a, plane.b, plane.c, g.ravel()])


def _common_args(job: RenderJob):
    rig = job.rig
    height, width = job.shape
    cx, cy = rig.sensor.principal_point
    mode, param, mla, elems = rig.kernel_args()
    return (width, height, job.K, cx, cy, rig.sensor.pixel_pitch, job.samples, job.seed,
            mode, param, mla, elems)


def _meta(job: RenderJob, **extra) -> dict:
    meta = {"seed": int(job.seed), "samples": int(job.samples), "K": int(job.K),
            "rig": job.rig.fingerprint()}
    meta.update(extra)
    return meta


def render_color(job: RenderJob) -> FloatImage:
    """Mean shaded colour over all samples; blocked rays contribute zero."""
    if not isinstance(job.target, PatternBoard):
        raise TypeError("colour renders need a PatternBoard target")
    board = job.target
    data = K.render_color_kernel(*_common_args(job), _plane_row(board.plane),
                                 board.shading_vector())
    return FloatImage(data, Tag.COLOR, _meta(job))


def _window_args(job: RenderJob, window):
    height, width = job.shape
    if window is None:
        return (0, 0, width, height), {}
    col0, row0, w, h = (int(v) for v in window)
    if w < 1 or h < 1 or col0 < 0 or row0 < 0 or col0 + w > width or row0 + h > height:
        raise ValueError(f"window {window} outside the {width}x{height} render")
    return (col0, row0, w, h), {"window": [col0, row0, w, h]}


def render_positional(job: RenderJob, window=None) -> FloatImage:
    """Packed (u, v, ratio) render against a board or any framed plane.

    Rays that leave the camera but miss the (infinite) target plane count as
    blocked for this render. ``window = (col0, row0, w, h)`` in render pixels
    restricts tracing to a crop; the result equals that crop of the full render.
    """
    plane = job.target.plane if isinstance(job.target, PatternBoard) else job.target
    win, extra = _window_args(job, window)
    data = K.render_positional_kernel(*_common_args(job), _plane_row(plane)[None], *win)
    return FloatImage(data[0], Tag.UV_POSITIONAL, _meta(job, **extra))


def ratio_image(raw: FloatImage) -> FloatImage:
    return FloatImage(raw.data[:, :, 2:3].copy(), Tag.RATIO, dict(raw.meta))


def normalize_positional(raw: FloatImage, ratio_min: float | None = None) -> FloatImage:
    """Divide the packed position channels by the ray proportion.

    Pixels with ratio <= ``ratio_min`` (default 1/samples) become NaN in the
    two position channels; the ratio is kept in channel 3. For plane-positional
    images the fixed coordinate stays in the metadata (see :func:`plane_points`).
    """
    if raw.channels != 3:
        raise ValueError("packed positional images have three channels")
    if ratio_min is None:
        ratio_min = 1.0 / raw.meta.get("samples", 1)
    data = raw.data.astype(np.float64)
    ratio = data[:, :, 2]
    valid = ratio > ratio_min
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(valid, data[:, :, 0] / ratio, np.nan)
        v = np.where(valid, data[:, :, 1] / ratio, np.nan)
    meta = dict(raw.meta, normalized=True)
    return FloatImage(np.stack([u, v, ratio], axis=-1), raw.tag, meta)


def plane_points(img: FloatImage) -> np.ndarray:
    """World points ``(H, W, 3)`` of a normalized plane-positional image.

    The two stored in-plane coordinates are combined with the fixed coordinate
    from the metadata, in xyz order; invalid pixels are NaN throughout.
    """
    if img.tag != Tag.PLANE_POSITIONAL or not img.meta.get("normalized"):
        raise ValueError("expected a normalized plane-positional image")
    axis = "xyz".index(img.meta["fixed_axis"])
    data = img.data.astype(np.float64)
    valid = np.all(np.isfinite(data[:, :, :2]), axis=-1)
    fixed = np.where(valid, float(img.meta["fixed_value"]), np.nan)
    inplane = [data[:, :, 0], data[:, :, 1]]
    return np.stack([inplane.pop(0) if k != axis else fixed for k in range(3)], axis=-1)


def render_proxy_planes(rig: CameraRig, pair: ProxyPlanePair, K_scale: int, n: int, seed: int,
                        normalize: bool = True):
    """Render J_near and J_far in one pass: every sample ray is intersected with both planes."""
    job = RenderJob(rig, pair.near, K_scale, n, seed)
    planes = np.stack([_plane_row(pair.near), _plane_row(pair.far)])
    win, _ = _window_args(job, None)
    data = K.render_positional_kernel(*_common_args(job), planes, *win)
    out = []
    for idx, value in enumerate(pair.fixed_values):
        img = FloatImage(data[idx], Tag.PLANE_POSITIONAL,
                         _meta(job, fixed_axis=pair.fixed_axis, fixed_value=float(value),
                               plane="near" if idx == 0 else "far"))
        out.append(normalize_positional(img) if normalize else img)
    return tuple(out)


def valid_mask(img: FloatImage) -> np.ndarray:
    return np.all(np.isfinite(img.data), axis=-1)
