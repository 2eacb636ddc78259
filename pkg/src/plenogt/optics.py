"""Geometric-optics primitives: rays, planes, spherical caps, refraction, hex lattice.

All lengths are millimetres and everything is evaluated in double precision.
The functions accept single vectors; the ``*_many`` variants broadcast over a
leading batch axis and are what the camera reference tracer uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

SQRT3_2 = math.sqrt(3.0) / 2.0


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if not (np.isfinite(norm) and norm > 0.0):
        raise ValueError("cannot normalise a zero or non-finite vector")
    return v / norm


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.dir, dtype=np.float64)
        norm = np.linalg.norm(d)
        if not np.all(np.isfinite(origin)) or not np.isfinite(norm) or norm == 0.0:
            raise ValueError("ray needs a finite origin and a non-zero direction")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dir", d / norm)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.dir


@dataclass(frozen=True)
class PlaneGeom:
    """Plane through ``q`` with unit normal ``n``.

    An optional frame ``a + u*b + v*c`` gives the (u, v) parametrisation used by
    positional renders. When only ``q``/``n`` are given the frame is left unset.
    """

    q: np.ndarray
    n: np.ndarray
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    _gram_inv: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))
        object.__setattr__(self, "n", _unit(self.n))
        if self.b is None:
            return
        a = np.asarray(self.a if self.a is not None else self.q, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        scale = np.linalg.norm(b) * np.linalg.norm(c)
        if scale == 0.0 or np.linalg.norm(np.cross(b, c)) < 1e-12 * scale:
            raise ValueError("plane frame vectors b and c must be linearly independent")
        for vec in (b, c):
            if abs(np.dot(vec, self.n)) > 1e-9 * np.linalg.norm(vec):
                raise ValueError("plane frame vectors must be orthogonal to the normal")
        gram = np.array([[b @ b, b @ c], [b @ c, c @ c]])
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "_gram_inv", np.linalg.inv(gram))

    @classmethod
    def from_frame(cls, a, b, c) -> "PlaneGeom":
        a = np.asarray(a, dtype=np.float64)
        n = np.cross(np.asarray(b, dtype=np.float64), np.asarray(c, dtype=np.float64))
        return cls(q=a, n=n, a=a, b=b, c=c)

    @property
    def has_frame(self) -> bool:
        return self.b is not None

    def to_uv(self, points) -> np.ndarray:
        """Frame coordinates of points (projected along ``n`` if off-plane)."""
        if not self.has_frame:
            raise ValueError("plane has no (a, b, c) frame")
        rel = np.asarray(points, dtype=np.float64) - self.a
        rhs = np.stack([rel @ self.b, rel @ self.c], axis=-1)
        return rhs @ self._gram_inv.T

    def from_uv(self, uv) -> np.ndarray:
        if not self.has_frame:
            raise ValueError("plane has no (a, b, c) frame")
        uv = np.asarray(uv, dtype=np.float64)
        return self.a + uv[..., :1] * self.b + uv[..., 1:2] * self.c

    def signed_distance(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.q) @ self.n


@dataclass(frozen=True)
class SphericalSurface:
    """Rotationally symmetric refracting surface with its vertex on the optical axis.

    ``radius`` follows the usual sign convention: positive when the centre of
    curvature lies further along the axis than the vertex. ``math.inf`` is flat.
    ``ior_before`` is the medium on the sensor side.
    """

    axial_position: float
    radius: float
    aperture_radius: float
    ior_before: float = 1.0
    ior_after: float = 1.0

    def __post_init__(self):
        if not self.aperture_radius > 0:
            raise ValueError("aperture_radius must be > 0")
        if not math.isinf(self.radius) and abs(self.radius) <= self.aperture_radius:
            raise ValueError("|radius| must exceed aperture_radius for a curved surface")
        for ior in (self.ior_before, self.ior_after):
            if not (math.isfinite(ior) and ior >= 1.0):
                raise ValueError("refractive indices must be finite and >= 1")

    @property
    def curvature(self) -> float:
        return 0.0 if math.isinf(self.radius) else 1.0 / self.radius


class HexIndex(NamedTuple):
    i: int
    j: int


class SurfaceHit(NamedTuple):
    t: float
    point: np.ndarray
    normal: np.ndarray
    blocked: bool


# --------------------------------------------------------------------------
# refraction


def refract_many(d, n, eta1, eta2):
    """Vectorised Snell refraction.

    Returns ``(dirs, ok)``; rows where ``ok`` is False are total internal
    reflections and hold NaN. Normals may point either way.
    """
    d = np.asarray(d, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    cos_in = -np.sum(d * n, axis=-1, keepdims=True)
    n = np.where(cos_in < 0.0, -n, n)
    cos_in = np.abs(cos_in)
    eta = np.asarray(eta1, dtype=np.float64) / np.asarray(eta2, dtype=np.float64)
    eta = eta[..., None] if np.ndim(eta) else eta
    k = 1.0 - eta * eta * (1.0 - cos_in * cos_in)
    ok = k[..., 0] >= 0.0
    out = eta * d + (eta * cos_in - np.sqrt(np.maximum(k, 0.0))) * n
    out = out / np.linalg.norm(out, axis=-1, keepdims=True)
    out[~ok] = np.nan
    return out, ok


def refract(d, n, eta1: float, eta2: float) -> Optional[np.ndarray]:
    """Refract unit direction ``d`` at a surface with unit normal ``n``.

    Returns None on total internal reflection.
    """
    out, ok = refract_many(np.asarray(d)[None], np.asarray(n)[None], eta1, eta2)
    return out[0] if ok[0] else None


# --------------------------------------------------------------------------
# intersections


def intersect_plane(ray: Ray, plane: PlaneGeom, forward_only: bool = True):
    """Return ``(t, point)`` or None when the ray is parallel (or behind, if forward_only)."""
    denom = float(ray.dir @ plane.n)
    if abs(denom) < 1e-15:
        return None
    t = float((plane.q - ray.origin) @ plane.n) / denom
    if forward_only and t < 0.0:
        return None
    return t, ray.at(t)


def intersect_plane_many(origins, dirs, q, n):
    """Batch plane intersection; returns ``(t, points, ok)`` with ok False for parallel or t<0."""
    q = np.asarray(q, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((q - origins) @ n) / denom
    ok = (np.abs(denom) >= 1e-15) & (t >= 0.0)
    t = np.where(ok, t, np.nan)
    return t, origins + t[:, None] * dirs, ok


def sphere_hits_many(origins, dirs, surf: SphericalSurface):
    """Batch intersection with a spherical cap on the z axis.

    Returns ``(t, points, normals, hit, blocked)``. Normals face against the ray.
    Uses the vertex-relative quadratic so flat surfaces fall out as c == 0.
    """
    c = surf.curvature
    ox, oy = origins[:, 0], origins[:, 1]
    oz = origins[:, 2] - surf.axial_position
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    a = c * (dx * dx + dy * dy + dz * dz)
    b = c * (ox * dx + oy * dy + oz * dz) - dz
    cc = c * (ox * ox + oy * oy + oz * oz) - 2.0 * oz
    disc = b * b - a * cc
    hit = disc >= 0.0
    root = np.sqrt(np.maximum(disc, 0.0))
    denom = -b + np.copysign(root, -b)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cc / denom
    hit &= np.isfinite(t) & (t >= 0.0)
    t = np.where(hit, t, np.nan)
    points = origins + t[:, None] * dirs
    px, py = points[:, 0], points[:, 1]
    normals = np.stack([c * px, c * py, c * (points[:, 2] - surf.axial_position) - 1.0], axis=-1)
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    flip = np.sum(normals * dirs, axis=-1) > 0.0
    normals[flip] *= -1.0
    blocked = hit & (px * px + py * py > surf.aperture_radius ** 2)
    return t, points, normals, hit, blocked


def intersect_sphere_surface(ray: Ray, surf: SphericalSurface) -> Optional[SurfaceHit]:
    """Nearest forward hit with the cap; None if the ray misses it altogether.

    A hit outside the clear aperture comes back with ``blocked=True``.
    """
    t, p, nrm, hit, blocked = sphere_hits_many(ray.origin[None], ray.dir[None], surf)
    if not hit[0]:
        return None
    return SurfaceHit(float(t[0]), p[0], nrm[0], bool(blocked[0]))


# --------------------------------------------------------------------------
# hexagonal microlens lattice


def microlens_type(idx) -> int:
    i, j = idx
    return (i - j) % 3


def hex_basis(pitch: float) -> np.ndarray:
    """Rows are e1 = (p, 0) and e2 = (p/2, p*sqrt(3)/2)."""
    return np.array([[pitch, 0.0], [0.5 * pitch, SQRT3_2 * pitch]])


def lens_center(idx, pitch: float, origin=(0.0, 0.0)) -> np.ndarray:
    i, j = idx
    return np.asarray(origin, dtype=np.float64) + i * hex_basis(pitch)[0] + j * hex_basis(pitch)[1]


def nearest_lens_centers(points, pitch: float, origin=(0.0, 0.0)):
    """Vectorised nearest-cell lookup. Returns integer arrays ``(i, j)``.

    Candidates are the 3x3 block around the rounded lattice coordinates; exact
    ties go to the smaller j, then the smaller i.
    """
    if not pitch > 0:
        raise ValueError("pitch must be > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64)) - np.asarray(origin, dtype=np.float64)
    jf = pts[:, 1] / (SQRT3_2 * pitch)
    i_f = (pts[:, 0] - 0.5 * pitch * jf) / pitch
    i0 = np.rint(i_f).astype(np.int64)
    j0 = np.rint(jf).astype(np.int64)
    best_i = np.zeros_like(i0)
    best_j = np.zeros_like(j0)
    best_d = np.full(pts.shape[0], np.inf)
    # scan in (j, i) ascending so strict '<' keeps the tie-break winner
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            ci = i0 + di
            cj = j0 + dj
            cx = ci * pitch + cj * (0.5 * pitch)
            cy = cj * (SQRT3_2 * pitch)
            d2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
            better = d2 < best_d
            best_d = np.where(better, d2, best_d)
            best_i = np.where(better, ci, best_i)
            best_j = np.where(better, cj, best_j)
    return best_i, best_j


def nearest_lens_center(point, pitch: float, origin=(0.0, 0.0)) -> HexIndex:
    i, j = nearest_lens_centers(np.asarray(point)[None], pitch, origin)
    return HexIndex(int(i[0]), int(j[0]))
