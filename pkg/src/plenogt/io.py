"""PFM images with JSON sidecars, and correspondence CSV files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .extraction import Correspondence, sort_key
from .optics import HexIndex
from .render import FloatImage, Tag, plane_points


class FormatError(ValueError):
    pass


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_pfm(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        data = data[:, :, None]
    height, width, channels = data.shape
    if channels not in (1, 3):
        raise ValueError("PFM holds 1 or 3 channels")
    header = f"{'PF' if channels == 3 else 'Pf'}\n{width} {height}\n-1.0\n".encode("ascii")
    payload = np.ascontiguousarray(data[::-1]).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _header_tokens(buf: bytes):
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PFM header")
        tokens.append(buf[start:pos].decode("ascii", errors="replace"))
    # exactly one whitespace byte separates the scale from the payload
    return tokens, pos + 1


def read_pfm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    tokens, offset = _header_tokens(buf[:256])
    kind, w, h, scale = tokens
    if kind not in ("PF", "Pf"):
        raise FormatError(f"bad PFM magic {kind!r}")
    try:
        width, height, scale = int(w), int(h), float(scale)
    except ValueError as exc:
        raise FormatError("malformed PFM header") from exc
    if width < 1 or height < 1 or scale == 0 or not math.isfinite(scale):
        raise FormatError("malformed PFM header")
    channels = 3 if kind == "PF" else 1
    expected = width * height * channels * 4
    payload = buf[offset:]
    if len(payload) < expected:
        raise FormatError(f"truncated PFM payload: {len(payload)} of {expected} bytes")
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(payload[:expected], dtype=dtype).reshape(height, width, channels)
    return data[::-1].astype(np.float32)


def write_image(path, img: FloatImage) -> None:
    write_pfm(path, img.data)
    meta = {"tag": img.tag.value, **img.meta}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_image(path) -> FloatImage:
    data = read_pfm(path)
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {"tag": Tag.COLOR.value}
    tag = meta.pop("tag", Tag.COLOR.value)
    return FloatImage(data, Tag(tag), meta)


def read_plane_points(path) -> np.ndarray:
    """World points of a stored proxy-plane image, fixed coordinate reattached."""
    return plane_points(read_image(path))


# --------------------------------------------------------------------------
# correspondences

CSV_HEADER = ["k", "lens_i", "lens_j", "lens_type", "px_x", "px_y", "world_x", "world_y",
              "world_z", "board_u", "board_v", "method", "filter_passed"]


def _g(x) -> str:
    return f"{float(x):.9g}"


def _flag(v) -> str:
    return "" if v is None else str(int(bool(v)))


def write_correspondences(path, corrs) -> None:
    rows = sorted(corrs, key=sort_key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c in rows:
            lens = ("", "", "") if c.lens is None else (c.lens.i, c.lens.j, c.lens_type)
            writer.writerow([c.k, *lens, _g(c.pixel[0]), _g(c.pixel[1]),
                             *(_g(v) for v in c.world), *(_g(v) for v in c.board_uv),
                             c.method, _flag(c.filter_passed)])


def read_correspondences(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise FormatError("unexpected correspondence CSV header")
        for row in reader:
            lens = None if row["lens_i"] == "" else HexIndex(int(row["lens_i"]), int(row["lens_j"]))
            flag = None if row["filter_passed"] == "" else bool(int(row["filter_passed"]))
            out.append(Correspondence(
                k=int(row["k"]), lens=lens, pixel=(float(row["px_x"]), float(row["px_y"])),
                world=np.array([float(row[f"world_{a}"]) for a in "xyz"]),
                board_uv=np.array([float(row["board_u"]), float(row["board_v"])]),
                method=row["method"], filter_passed=flag))
    return out


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
