"""Sub-pixel ground-truth positions of pattern points from positional images.

Positional arrays are ``(H, W, D)`` float arrays indexed ``J[row, col]`` with
NaN marking invalid pixels; a pixel position is written ``(i, j) = (col, row)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .camera import CameraRig
from .optics import HexIndex, PlaneGeom, Ray, microlens_type, nearest_lens_centers
from .scene import PatternBoard

METHODS = ("direct", "two-plane")


@dataclass(frozen=True)
class ExtractionConfig:
    """``lam`` is an absolute acceptance radius in board units. When None the
    radius is ``lam_scale`` times the local J-pixel spacing at the candidate."""

    K: int = 1
    lam: Optional[float] = None
    lam_scale: float = 1.0
    lam_d: float = 0.15
    lam_alpha: float = math.radians(10.0)
    method: str = "direct"
    filter_enabled: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0 < self.lam_d < 1:
            raise ValueError("lam_d must lie in (0, 1)")
        if not 0 < self.lam_alpha < math.pi:
            raise ValueError("lam_alpha must lie in (0, pi)")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")


@dataclass
class GridStats:
    d_vert: float
    d_horiz: float
    alpha: float
    vert_dev: np.ndarray
    horiz_dev: np.ndarray
    angles: np.ndarray
    angle_dev: np.ndarray


@dataclass(frozen=True)
class FilterResult:
    passed: bool
    reason: Optional[str] = None

    def __bool__(self):
        return self.passed


@dataclass
class Correspondence:
    k: int
    lens: Optional[HexIndex]
    pixel: tuple
    world: np.ndarray
    board_uv: np.ndarray
    method: str = "direct"
    filter_passed: Optional[bool] = True
    s: float = float("nan")
    t: float = float("nan")
    distance: float = float("nan")
    contained: bool = True

    @property
    def lens_type(self) -> Optional[int]:
        return None if self.lens is None else microlens_type(self.lens)

    @property
    def key(self) -> tuple:
        return (self.lens, self.k)


@dataclass
class ExtractionResult:
    correspondences: list
    rejections: list = field(default_factory=list)


class DegenerateBasis(ValueError):
    pass


# --------------------------------------------------------------------------
# microlens partition


@dataclass
class LensPartition:
    labels: np.ndarray
    lenses: list

    def mask(self, lens) -> np.ndarray:
        return self.labels == self.lenses.index(lens)


def split_microlens_images(shape, rig: CameraRig, K: int = 1, origin=(0, 0)) -> LensPartition:
    """Assign each pixel of a ``shape = (H, W)`` render at scale K to the microlens
    whose orthographic projection onto the sensor is nearest to the pixel centre.

    ``origin`` is the global (col, row) of the array's first pixel for windowed renders.
    """
    height, width = shape
    if not rig.mla.enabled:
        return LensPartition(np.zeros(shape, dtype=np.int64), [None])
    rows, cols = np.mgrid[origin[1]:origin[1] + height, origin[0]:origin[0] + width]
    x, y = rig.pixel_center(cols.ravel().astype(np.float64), rows.ravel().astype(np.float64), K)
    ci, cj = nearest_lens_centers(np.column_stack([x, y]), rig.mla.pitch, rig.mla.origin_offset)
    pairs, labels = np.unique(np.column_stack([cj, ci]), axis=0, return_inverse=True)
    lenses = [HexIndex(int(i), int(j)) for j, i in pairs]
    return LensPartition(labels.reshape(shape), lenses)


# --------------------------------------------------------------------------
# search, filter, interpolation


def naive_search(J: np.ndarray, target, lam: float, mask: Optional[np.ndarray] = None):
    """Row-major first pixel minimising ||target - J||, or None if not closer than lam."""
    d = np.linalg.norm(J - np.asarray(target, dtype=np.float64), axis=-1)
    d = np.where(np.isfinite(d), d, np.inf)
    if mask is not None:
        d = np.where(mask, d, np.inf)
    flat = int(np.argmin(d))
    best = d.flat[flat]
    if not best < lam:
        return None
    row, col = divmod(flat, J.shape[1])
    return col, row


def _angle(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    if h.shape[-1] == 2:
        cross = np.abs(h[..., 0] * v[..., 1] - h[..., 1] * v[..., 0])
    else:
        cross = np.linalg.norm(np.cross(h, v), axis=-1)
    return np.arctan2(cross, np.sum(h * v, axis=-1))


def grid_stats(block: np.ndarray) -> GridStats:
    """Length and angle statistics of a 4x4 block ``block[b, a]`` of positions."""
    vert = np.linalg.norm(block[:-1, :, :] - block[1:, :, :], axis=-1)
    horiz = np.linalg.norm(block[:, :-1, :] - block[:, 1:, :], axis=-1)
    d_vert = vert.sum() / 12.0
    d_horiz = horiz.sum() / 12.0
    h = block[:-1, 1:, :] - block[:-1, :-1, :]
    v = block[1:, :-1, :] - block[:-1, :-1, :]
    angles = _angle(h, v)
    alpha = angles.sum() / 9.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vert_dev = np.abs(1.0 - vert / d_vert)
        horiz_dev = np.abs(1.0 - horiz / d_horiz)
    return GridStats(d_vert, d_horiz, alpha, vert_dev.ravel(), horiz_dev.ravel(), angles.ravel(),
                     np.abs(angles - alpha).ravel())


def grid_filter(J: np.ndarray, ij, lam_d: float, lam_alpha: float,
                mask: Optional[np.ndarray] = None):
    """Check that the 4x4 neighbourhood around the quad at ``ij`` forms a regular grid.

    ``ij`` is the quad's top-left pixel; the neighbourhood spans columns
    i-1..i+2 and rows j-1..j+2. Returns ``(FilterResult, GridStats or None)``.
    """
    i, j = ij
    height, width = J.shape[:2]
    if i - 1 < 0 or j - 1 < 0 or i + 2 >= width or j + 2 >= height:
        return FilterResult(False, "boundary"), None
    if mask is not None and not mask[j - 1:j + 3, i - 1:i + 3].all():
        return FilterResult(False, "boundary"), None
    block = np.asarray(J[j - 1:j + 3, i - 1:i + 3], dtype=np.float64)
    if not np.all(np.isfinite(block)):
        return FilterResult(False, "invalid-pixel"), None
    stats = grid_stats(block)
    if not (stats.d_vert > 0 and stats.d_horiz > 0):
        return FilterResult(False, "length"), stats
    if not (np.all(stats.vert_dev < lam_d) and np.all(stats.horiz_dev < lam_d)):
        return FilterResult(False, "length"), stats
    if not np.all(stats.angle_dev < lam_alpha):
        return FilterResult(False, "angle"), stats
    return FilterResult(True), stats


def solve_st(j0, j1, j2, p, rel_tol: float = 1e-12):
    """Solve ``p = j0 + s (j1 - j0) + t (j2 - j0)`` for coplanar points.

    For 3D input the system is reduced to the plane of the three points via
    the normal equations, which is exact for coplanar data.
    """
    e1 = np.asarray(j1, dtype=np.float64) - j0
    e2 = np.asarray(j2, dtype=np.float64) - j0
    r = np.asarray(p, dtype=np.float64) - j0
    gram = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    det = gram[0, 0] * gram[1, 1] - gram[0, 1] ** 2
    if not det > rel_tol * gram[0, 0] * gram[1, 1]:
        raise DegenerateBasis("collinear edge vectors")
    s, t = np.linalg.solve(gram, np.array([e1 @ r, e2 @ r]))
    return float(s), float(t)


def interpolate_corner(J: np.ndarray, ij, p, K: int, direction=(1, 1)):
    """Sub-pixel position of ``p`` in base-resolution pixels.

    ``ij`` is the pixel whose value is the closest quad corner; ``direction``
    selects which of the four adjacent quads (unit steps along i and j).
    Returns ``((x, y), s, t)``.
    """
    i, j = ij
    si, sj = direction
    s, t = solve_st(J[j, i], J[j, i + si], J[j + sj, i], p)
    return ((i + si * s) / K, (j + sj * t) / K), s, t


_DIRECTIONS = ((1, 1), (-1, 1), (1, -1), (-1, -1))


def select_quad(J: np.ndarray, ij, p, mask: Optional[np.ndarray] = None):
    """Pick the adjacent quad that contains ``p``.

    Returns ``(direction, s, t, contained)``; among containing quads the one with
    the smallest s^2 + t^2 wins. Without a containing quad the least-violating
    one is returned with ``contained=False``. None if no quad is usable.
    """
    i, j = ij
    height, width = J.shape[:2]
    best = None
    for di, dj in _DIRECTIONS:
        if not (0 <= i + di < width and 0 <= j + dj < height):
            continue
        if mask is not None and not (mask[j, i + di] and mask[j + dj, i]):
            continue
        corners = (J[j, i], J[j, i + di], J[j + dj, i])
        if not all(np.all(np.isfinite(c)) for c in corners):
            continue
        try:
            s, t = solve_st(*corners, p)
        except DegenerateBasis:
            continue
        violation = max(-s, -t, 0.0)
        score = (violation, s * s + t * t)
        if best is None or score < best[0]:
            best = (score, (di, dj), s, t)
    if best is None:
        return None
    (violation, _), direction, s, t = best
    return direction, s, t, violation == 0.0


def local_spacing(J: np.ndarray, ij, mask: Optional[np.ndarray] = None) -> float:
    """Mean distance from J(i, j) to its valid 4-neighbours."""
    i, j = ij
    height, width = J.shape[:2]
    dists = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ii, jj = i + di, j + dj
        if not (0 <= ii < width and 0 <= jj < height):
            continue
        if mask is not None and not mask[jj, ii]:
            continue
        d = np.linalg.norm(J[jj, ii] - J[j, i])
        if np.isfinite(d):
            dists.append(d)
    return float(np.mean(dists)) if dists else float("nan")


# --------------------------------------------------------------------------
# two-plane method


def pixel_ray(J_near: np.ndarray, J_far: np.ndarray, ij) -> Optional[Ray]:
    i, j = ij
    near = np.asarray(J_near[j, i], dtype=np.float64)
    far = np.asarray(J_far[j, i], dtype=np.float64)
    if not (np.all(np.isfinite(near)) and np.all(np.isfinite(far))):
        return None
    if np.linalg.norm(far - near) < 1e-9:
        raise ValueError("degenerate pixel ray: near and far points coincide")
    return Ray(near, far - near)


def positional_from_planes(J_near: np.ndarray, J_far: np.ndarray, plane: PlaneGeom) -> np.ndarray:
    """Intersect every pixel ray (near -> far) with ``plane``; NaN where undefined."""
    near = np.asarray(J_near, dtype=np.float64)
    delta = np.asarray(J_far, dtype=np.float64) - near
    denom = delta @ plane.n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((plane.q - near) @ plane.n) / denom
    t = np.where(np.abs(denom) > 1e-15, t, np.nan)
    return near + t[..., None] * delta


# --------------------------------------------------------------------------
# driver


def _first_argmin_per_label(d_sorted, starts, seg_ids):
    mins = np.minimum.reduceat(d_sorted, starts)
    hits = np.flatnonzero(d_sorted == mins[seg_ids])
    segs, first = np.unique(seg_ids[hits], return_index=True)
    return segs, hits[first], mins[segs]


def extract(J_uv: np.ndarray, board: PatternBoard, config: ExtractionConfig,
            partition: LensPartition, origin=(0, 0), points=None,
            lenses=None) -> ExtractionResult:
    """Run naive search, grid filter and interpolation for every (lens, point).

    ``J_uv`` holds board (u, v) per pixel at scale ``config.K``; ``origin`` is the
    global (col, row) of its first pixel. ``points`` and ``lenses`` optionally
    restrict the search. One correspondence is emitted per accepted
    (lens, point) pair, sorted by lens then point index.
    """
    J = np.asarray(J_uv, dtype=np.float64)[..., :2]
    height, width = J.shape[:2]
    labels = partition.labels.ravel()
    order = np.argsort(labels, kind="stable")
    seg_ids_sorted = labels[order]
    starts = np.flatnonzero(np.r_[True, seg_ids_sorted[1:] != seg_ids_sorted[:-1]])
    flat_J = J.reshape(-1, 2)
    valid = np.all(np.isfinite(flat_J), axis=1)
    out, rejected = [], []
    wanted = range(board.n_points) if points is None else points
    for k in wanted:
        target = board.points_uv[k]
        d = np.linalg.norm(flat_J - target, axis=1)
        d = np.where(valid, d, np.inf)
        segs, flat_idx, mins = _first_argmin_per_label(d[order], starts, seg_ids_sorted)
        for seg, pos, dist in zip(segs, flat_idx, mins):
            if not np.isfinite(dist):
                continue
            lens = partition.lenses[seg]
            if lenses is not None and lens not in lenses:
                continue
            pix = int(order[pos])
            j, i = divmod(pix, width)
            mask = partition.labels == seg if lens is not None else None
            lam = config.lam
            if lam is None:
                lam = config.lam_scale * local_spacing(J, (i, j), mask)
            if not dist < lam:
                continue
            quad = select_quad(J, (i, j), target, mask)
            if quad is None:
                rejected.append((lens, k, "no-quad"))
                continue
            (si, sj), s, t, contained = quad
            passed = None
            if config.filter_enabled:
                top_left = (min(i, i + si), min(j, j + sj))
                result, _ = grid_filter(J, top_left, config.lam_d, config.lam_alpha, mask)
                if not result:
                    rejected.append((lens, k, result.reason))
                    continue
                passed = True
            px = ((origin[0] + i + si * s) / config.K, (origin[1] + j + sj * t) / config.K)
            out.append(Correspondence(
                k=k, lens=lens, pixel=px, world=board.plane.from_uv(target),
                board_uv=np.array(target, dtype=np.float64), method=config.method,
                filter_passed=passed, s=s, t=t, distance=float(dist), contained=contained))
    out.sort(key=sort_key)
    return ExtractionResult(out, rejected)


def sort_key(c: Correspondence):
    if c.lens is None:
        return (0, 0, 0, c.k)
    return (1, c.lens.i, c.lens.j, c.k)


def extract_direct(J_uv, board, config, rig) -> ExtractionResult:
    return extract(J_uv, board, config, split_microlens_images(J_uv.shape[:2], rig, config.K))


def extract_two_plane(J_near, J_far, board, config, rig) -> ExtractionResult:
    world = positional_from_planes(J_near, J_far, board.plane)
    uv = board.plane.to_uv(world)
    return extract(uv, board, config, split_microlens_images(uv.shape[:2], rig, config.K))


# --------------------------------------------------------------------------
# comparison


def compare_correspondences(a: list, b: list) -> dict:
    """Match on (lens, k) and summarise pixel differences (mean, SEM, ratios)."""
    index_b = {c.key: c for c in b}
    diffs = np.array([np.hypot(c.pixel[0] - index_b[c.key].pixel[0],
                               c.pixel[1] - index_b[c.key].pixel[1])
                      for c in a if c.key in index_b])
    n = len(diffs)
    if n:
        mean = float(diffs.mean())
        sem = float(diffs.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    else:
        mean = sem = float("nan")
    return {
        "matched": n,
        "count_a": len(a),
        "count_b": len(b),
        "mean_abs_diff_px": mean,
        "sem_px": sem,
        "max_abs_diff_px": float(diffs.max()) if n else float("nan"),
        "ratio_matched_to_a": n / len(a) if a else float("nan"),
        "ratio_b_to_a": len(b) / len(a) if a else float("nan"),
    }
