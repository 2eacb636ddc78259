"""Planar calibration boards and the axis-aligned proxy planes of the two-plane method."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from . import _kernels as K
from .optics import PlaneGeom

BLACK = (0.0, 0.0, 0.0)
WHITE = (1.0, 1.0, 1.0)


class PatternKind(str, enum.Enum):
    CHECKERBOARD = "checkerboard"
    DOT_GRID = "dot-grid"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class Pose:
    """Board placement: centre in world mm, intrinsic xyz Euler angles in degrees.

    At zero rotation the board faces the camera: u runs along world +x and v
    along world -y, so u grows to the right and v downwards in the image.
    """

    center: tuple = (0.0, 0.0, -500.0)
    rotation_deg: tuple = (0.0, 0.0, 0.0)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        rot = Rotation.from_euler("xyz", self.rotation_deg, degrees=True)
        return rot.apply([1.0, 0.0, 0.0]), rot.apply([0.0, -1.0, 0.0])


@dataclass(frozen=True)
class PatternBoard:
    """A planar pattern in the plane ``a + u*b + v*c`` (b, c orthonormal, mm).

    ``rows``/``cols`` count interior points (corners or dots); the printed area
    spans ``(cols + 1) * size`` by ``(rows + 1) * size`` board units, surrounded by
    ``margin`` of light colour. Anything beyond that is ``background``.
    For the uniform pattern ``extent`` gives the printed width/height instead.
    """

    plane: PlaneGeom
    kind: PatternKind
    rows: int = 0
    cols: int = 0
    size: float = 1.0
    dot_radius: float = 0.0
    margin: float = 0.0
    dark: tuple = BLACK
    light: tuple = WHITE
    background: tuple = BLACK
    extent: tuple = (0.0, 0.0)
    points_uv: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def points_of_interest(self) -> np.ndarray:
        return self.plane.from_uv(self.points_uv)

    @property
    def n_points(self) -> int:
        return len(self.points_uv)

    @property
    def pattern_size(self) -> tuple[float, float]:
        if self.kind == PatternKind.UNIFORM:
            return tuple(self.extent)
        return (self.cols + 1) * self.size, (self.rows + 1) * self.size

    def shading_vector(self) -> np.ndarray:
        kind = {PatternKind.UNIFORM: K.SHADE_UNIFORM, PatternKind.CHECKERBOARD: K.SHADE_CHECKER,
                PatternKind.DOT_GRID: K.SHADE_DOTS}[self.kind]
        if self.kind == PatternKind.UNIFORM:
            head = [kind, self.extent[0], self.extent[1], 1.0, 0.0, self.margin]
        else:
            head = [kind, self.rows, self.cols, self.size, self.dot_radius, self.margin]
        return np.array(head + list(self.dark) + list(self.light) + list(self.background),
                        dtype=np.float64)


def board_to_world(board: PatternBoard, uv) -> np.ndarray:
    return board.plane.from_uv(uv)


def world_to_board(board: PatternBoard, point, tol: float = 1e-6):
    """Board (u, v) of a world point. Off-plane points are projected along the
    normal first; the second return value flags that projection."""
    point = np.asarray(point, dtype=np.float64)
    off_plane = np.abs(board.plane.signed_distance(point)) > tol
    return board.plane.to_uv(point), off_plane


def shade(board: PatternBoard, point) -> np.ndarray:
    """RGB colour of the board at a world point (projected onto the plane)."""
    uv = board.plane.to_uv(np.asarray(point, dtype=np.float64))
    shading = board.shading_vector()
    flat = np.atleast_2d(uv)
    out = np.array([K.shade_uv(u, v, shading) for u, v in flat])
    return out.reshape(np.shape(uv)[:-1] + (3,))


def _frame_from_pose(pose: Pose, width: float, height: float) -> PlaneGeom:
    b, c = pose.axes()
    center = np.asarray(pose.center, dtype=np.float64)
    a = center - 0.5 * width * b - 0.5 * height * c
    return PlaneGeom.from_frame(a, b, c)


def make_checkerboard(rows: int, cols: int, square_size: float, pose: Pose = Pose(),
                      margin: Optional[float] = None, background=BLACK) -> PatternBoard:
    """Checkerboard with ``rows x cols`` interior corners ((rows+1) x (cols+1) squares).

    Corners are enumerated row-major: k = r * cols + c sits at
    (u, v) = ((c + 1) * s, (r + 1) * s). The square at the board origin is dark.
    """
    if rows < 1 or cols < 1:
        raise ValueError("checkerboard needs at least one interior corner per axis")
    if not square_size > 0:
        raise ValueError("square_size must be > 0")
    margin = square_size if margin is None else margin
    width, height = (cols + 1) * square_size, (rows + 1) * square_size
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    uv = np.column_stack([(cc.ravel() + 1) * square_size, (rr.ravel() + 1) * square_size])
    return PatternBoard(plane=_frame_from_pose(pose, width, height), kind=PatternKind.CHECKERBOARD,
                        rows=rows, cols=cols, size=square_size, margin=margin,
                        background=tuple(background), points_uv=uv.astype(np.float64))


def make_dot_grid(rows: int, cols: int, spacing: float, dot_radius: float, pose: Pose = Pose(),
                  margin: Optional[float] = None, background=BLACK) -> PatternBoard:
    if rows < 1 or cols < 1:
        raise ValueError("dot grid needs at least one dot per axis")
    if not 0 < dot_radius < 0.5 * spacing:
        raise ValueError("dot_radius must lie in (0, spacing / 2)")
    margin = spacing if margin is None else margin
    width, height = (cols + 1) * spacing, (rows + 1) * spacing
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    uv = np.column_stack([(cc.ravel() + 1) * spacing, (rr.ravel() + 1) * spacing])
    return PatternBoard(plane=_frame_from_pose(pose, width, height), kind=PatternKind.DOT_GRID,
                        rows=rows, cols=cols, size=spacing, dot_radius=dot_radius, margin=margin,
                        background=tuple(background), points_uv=uv.astype(np.float64))


def make_uniform(color, width: float, height: float, pose: Pose = Pose(),
                 background=BLACK) -> PatternBoard:
    return PatternBoard(plane=_frame_from_pose(pose, width, height), kind=PatternKind.UNIFORM,
                        dark=tuple(color), light=tuple(color), background=tuple(background),
                        extent=(float(width), float(height)))


_AXES = {"x": 0, "y": 1, "z": 2}


def axis_plane(axis: str, value: float) -> PlaneGeom:
    """Plane ``axis = value`` whose (u, v) are the remaining world coordinates in order."""
    k = _AXES[axis]
    others = [i for i in range(3) if i != k]
    a = np.zeros(3)
    a[k] = value
    b = np.eye(3)[others[0]]
    c = np.eye(3)[others[1]]
    return PlaneGeom(q=a, n=np.eye(3)[k], a=a, b=b, c=c)


@dataclass(frozen=True)
class ProxyPlanePair:
    fixed_axis: str
    near_value: float
    far_value: float

    def __post_init__(self):
        if self.fixed_axis not in _AXES:
            raise ValueError("fixed_axis must be one of x, y, z")
        if self.near_value == self.far_value:
            raise ValueError("near and far proxy planes must differ")

    @property
    def near(self) -> PlaneGeom:
        return axis_plane(self.fixed_axis, self.near_value)

    @property
    def far(self) -> PlaneGeom:
        return axis_plane(self.fixed_axis, self.far_value)

    @property
    def fixed_values(self) -> tuple[float, float]:
        return self.near_value, self.far_value

    @classmethod
    def at_depths(cls, near_depth: float, far_depth: float) -> "ProxyPlanePair":
        """Planes perpendicular to the viewing axis at the given distances in front of the sensor."""
        if not 0 < near_depth < far_depth:
            raise ValueError("need 0 < near_depth < far_depth")
        return cls("z", -near_depth, -far_depth)
