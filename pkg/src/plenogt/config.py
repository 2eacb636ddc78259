"""JSON run configuration: schema, validation and construction of rig, boards and planes.

Every problem found is reported as a named violation (e.g. ``"mla.pitch > 0"``);
:func:`load_config` raises :class:`ConfigError` carrying the full list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

from .camera import ApertureStop, CameraRig, MlaSpec, ObjectiveSpec, SensorSpec
from .extraction import ExtractionConfig
from .optics import SphericalSurface
from .scene import PatternBoard, Pose, ProxyPlanePair, make_checkerboard, make_dot_grid, make_uniform

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_VEC2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_COLOR = {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
          "minItems": 3, "maxItems": 3}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "version": {"const": SCHEMA_VERSION},
    "camera": _obj({
        "sensor": _obj({
            "width_px": {"type": "integer", "minimum": 1},
            "height_px": {"type": "integer", "minimum": 1},
            "pixel_pitch": _POS,
            "diffusor_max_angle_deg": {"type": "number", "minimum": 0, "exclusiveMaximum": 90},
            "diffusor_distribution": {"enum": ["uniform-cone", "cosine-cone", "none"]},
        }, ["width_px", "height_px", "pixel_pitch"]),
        "mla": _obj({
            "enabled": {"type": "boolean"},
            "distance_to_sensor": _POS,
            "pitch": _POS,
            "thickness": _NONNEG,
            "ior": {"type": "number", "exclusiveMinimum": 1},
            "lens_radii": {"type": "array", "items": _POS, "minItems": 1, "maxItems": 3},
            "origin_offset": _VEC2,
            "gap_passthrough": {"type": "boolean"},
            "require_focal_beyond_sensor": {"type": "boolean"},
        }),
        "objective": _obj({
            "distance_to_mla": _NONNEG,
            "surfaces": {"type": "array", "items": _obj({
                "z": _NUM,
                "radius": {"type": ["number", "null"]},
                "aperture_radius": _POS,
                "ior_before": {"type": "number", "minimum": 1},
                "ior_after": {"type": "number", "minimum": 1},
            }, ["z", "radius", "aperture_radius", "ior_before", "ior_after"])},
            "aperture_stop": _obj({"z": _NUM, "radius": _NONNEG}, ["z", "radius"]),
        }, ["surfaces"]),
    }, ["sensor", "objective"]),
    "scene": _obj({
        "board": _obj({
            "kind": {"enum": ["checkerboard", "dot-grid", "uniform"]},
            "rows": {"type": "integer", "minimum": 1},
            "cols": {"type": "integer", "minimum": 1},
            "size": _POS,
            "dot_radius": _POS,
            "margin": _NONNEG,
            "color": _COLOR,
            "extent": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
            "background": _COLOR,
        }, ["kind"]),
        "poses": {"type": "array", "minItems": 1, "items": _obj({
            "name": {"type": "string"},
            "center": _VEC3,
            "rotation_deg": _VEC3,
        }, ["center"])},
    }, ["board", "poses"]),
    "render": _obj({
        "K": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 63 - 1},
        "output_dir": {"type": "string"},
    }),
    "extraction": _obj({
        "lam": {"type": ["number", "null"], "minimum": 0},
        "lam_scale": _POS,
        "lam_d": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "lam_alpha_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 180},
        "method": {"enum": ["direct", "two-plane"]},
        "filter_enabled": {"type": "boolean"},
    }),
    "planes": _obj({
        "fixed_axis": {"enum": ["x", "y", "z"]},
        "near": _NUM,
        "far": _NUM,
    }, ["fixed_axis", "near", "far"]),
}, ["version", "camera", "scene"])


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class RenderSettings:
    K: int = 1
    samples: int = 64
    seed: int = 0
    output_dir: str = "out"


@dataclass(frozen=True)
class RunConfig:
    rig: CameraRig
    board_spec: dict
    poses: tuple
    render: RenderSettings
    extraction: ExtractionConfig
    planes: Optional[ProxyPlanePair]
    raw: dict

    def pose(self, key) -> Pose:
        """Pose by list index or by name."""
        names = [p.get("name") for p in self.raw["scene"]["poses"]]
        if isinstance(key, str) and key in names:
            key = names.index(key)
        try:
            idx = int(key)
        except (TypeError, ValueError):
            raise KeyError(f"unknown pose {key!r}") from None
        if not 0 <= idx < len(self.poses):
            raise KeyError(f"unknown pose {key!r}")
        return self.poses[idx]

    def board(self, key=0) -> PatternBoard:
        return build_board(self.board_spec, self.pose(key))


def _message(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path) or "<root>"
    path = path.replace("camera.", "", 1) if path.startswith("camera.") else path
    v = err.validator_value
    simple = {"exclusiveMinimum": f"{path} > {v}", "minimum": f"{path} >= {v}",
              "exclusiveMaximum": f"{path} < {v}", "maximum": f"{path} <= {v}",
              "enum": f"{path} in {v}", "const": f"{path} == {v}", "type": f"{path} is {v}"}
    if err.validator in simple:
        return simple[err.validator]
    if err.validator == "required":
        return f"{path}: {err.message}"
    if err.validator == "additionalProperties":
        return f"{path}: unknown field ({err.message})"
    return f"{path}: {err.message}"


def _semantic(cfg: dict) -> list:
    out = []
    cam = cfg["camera"]
    mla = cam.get("mla", {})
    if mla.get("enabled", False):
        pitch = mla.get("pitch", MlaSpec.pitch)
        dist = mla.get("distance_to_sensor", MlaSpec.distance_to_sensor)
        ior = mla.get("ior", MlaSpec.ior)
        radii = mla.get("lens_radii", MlaSpec.lens_radii)
        if len(radii) not in (1, 3):
            out.append("mla.lens_radii has 1 or 3 entries")
        for idx, r in enumerate(radii):
            if r <= 0.5 * pitch:
                out.append(f"mla.lens_radii.{idx} > mla.pitch / 2")
            if mla.get("require_focal_beyond_sensor", True) and ior > 1 and r / (ior - 1) <= dist:
                out.append(f"mla.lens_radii.{idx} / (mla.ior - 1) > mla.distance_to_sensor")
        if mla.get("thickness", 0.0) >= dist:
            out.append("mla.thickness < mla.distance_to_sensor")
    surfaces = cam["objective"]["surfaces"]
    for a, b in zip(surfaces, surfaces[1:]):
        if b["z"] <= a["z"]:
            out.append("objective.surfaces ordered by z")
            break
    for idx, s in enumerate(surfaces):
        if s["radius"] is not None and abs(s["radius"]) <= s["aperture_radius"]:
            out.append(f"objective.surfaces.{idx}: |radius| > aperture_radius")
    board = cfg["scene"]["board"]
    kind = board["kind"]
    if kind in ("checkerboard", "dot-grid"):
        for key in ("rows", "cols", "size"):
            if key not in board:
                out.append(f"scene.board.{key} required for {kind}")
    if kind == "dot-grid" and "dot_radius" in board and "size" in board:
        if board["dot_radius"] >= 0.5 * board["size"]:
            out.append("scene.board.dot_radius < scene.board.size / 2")
    if kind == "uniform" and "extent" not in board:
        out.append("scene.board.extent required for uniform")
    planes = cfg.get("planes")
    if planes is not None and planes["near"] == planes["far"]:
        out.append("planes.near != planes.far")
    return out


def validate(cfg: dict) -> list:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    violations = [_message(e) for e in errors]
    if not violations:
        violations = _semantic(cfg)
    return violations


def build_rig(cam: dict) -> CameraRig:
    s = cam["sensor"]
    sensor = SensorSpec(s["width_px"], s["height_px"], s["pixel_pitch"],
                        math.radians(s.get("diffusor_max_angle_deg", 0.0)),
                        s.get("diffusor_distribution", "uniform-cone"))
    m = dict(cam.get("mla", {}))
    for key in ("lens_radii", "origin_offset"):
        if key in m:
            m[key] = tuple(m[key])
    mla = MlaSpec(**m)
    o = cam["objective"]
    surfaces = tuple(SphericalSurface(s["z"], math.inf if s["radius"] is None else s["radius"],
                                      s["aperture_radius"], s["ior_before"], s["ior_after"])
                     for s in o["surfaces"])
    stop = o.get("aperture_stop")
    stop = None if stop is None else ApertureStop(stop["z"], stop["radius"])
    return CameraRig(sensor, mla, ObjectiveSpec(surfaces, stop, o.get("distance_to_mla", 0.0)))


def build_board(board_cfg: dict, pose: Pose) -> PatternBoard:
    background = tuple(board_cfg.get("background", (0.0, 0.0, 0.0)))
    kind = board_cfg["kind"]
    if kind == "checkerboard":
        return make_checkerboard(board_cfg["rows"], board_cfg["cols"], board_cfg["size"], pose,
                                 board_cfg.get("margin"), background)
    if kind == "dot-grid":
        return make_dot_grid(board_cfg["rows"], board_cfg["cols"], board_cfg["size"],
                             board_cfg.get("dot_radius", 0.25 * board_cfg["size"]), pose,
                             board_cfg.get("margin"), background)
    return make_uniform(tuple(board_cfg.get("color", (1.0, 1.0, 1.0))), *board_cfg["extent"], pose,
                        background)


def parse_config(cfg: dict) -> RunConfig:
    violations = validate(cfg)
    if violations:
        raise ConfigError(violations)
    try:
        rig = build_rig(cfg["camera"])
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    poses = tuple(Pose(tuple(p["center"]), tuple(p.get("rotation_deg", (0.0, 0.0, 0.0))))
                  for p in cfg["scene"]["poses"])
    render = RenderSettings(**cfg.get("render", {}))
    ex = dict(cfg.get("extraction", {}))
    if "lam_alpha_deg" in ex:
        ex["lam_alpha"] = math.radians(ex.pop("lam_alpha_deg"))
    extraction = ExtractionConfig(K=render.K, **ex)
    planes = cfg.get("planes")
    pair = None if planes is None else ProxyPlanePair(planes["fixed_axis"], planes["near"],
                                                      planes["far"])
    return RunConfig(rig, dict(cfg["scene"]["board"]), poses, render, extraction, pair, cfg)


def load_config(path) -> RunConfig:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    return parse_config(cfg)
