"""High-resolution reference solutions rendered only around each corner.

A coarse full-frame pass locates every (lens, point) pair; each is then
re-extracted from a small positional window rendered at a larger scale
factor and sample count. Windows reuse the global per-pixel sample streams,
so a window is exactly the corresponding crop of a full render.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraRig
from .extraction import (
    Correspondence,
    ExtractionConfig,
    extract,
    extract_direct,
    sort_key,
    split_microlens_images,
)
from .render import RenderJob, normalize_positional, render_positional
from .scene import PatternBoard


@dataclass(frozen=True)
class ReferenceConfig:
    K: int = 8
    samples: int = 256 ** 2
    seed: int = 1_000_003
    coarse_K: int = 1
    coarse_samples: int = 32 ** 2
    margin: int = 4
    position_tolerance: float = 0.25

    @property
    def half_window(self) -> int:
        """Half side of a refinement window in reference pixels: room for the
        coarse position error plus the 4x4 filter neighbourhood."""
        return self.margin + max(1, int(np.ceil(self.position_tolerance * self.K)))


def candidate_corners(rig: CameraRig, board: PatternBoard, cfg: ReferenceConfig,
                      extraction: ExtractionConfig = ExtractionConfig()) -> list:
    job = RenderJob(rig, board, cfg.coarse_K, cfg.coarse_samples, cfg.seed)
    J = normalize_positional(render_positional(job)).data[..., :2]
    coarse = replace(extraction, K=cfg.coarse_K, filter_enabled=False)
    return extract_direct(J, board, coarse, rig).correspondences


def refine(rig: CameraRig, board: PatternBoard, approx: Correspondence, cfg: ReferenceConfig,
           extraction: ExtractionConfig = ExtractionConfig()):
    """Re-extract one (lens, point) pair from a window at scale ``cfg.K``; None if rejected."""
    height, width = rig.sensor.height_px * cfg.K, rig.sensor.width_px * cfg.K
    half = cfg.half_window
    ci, cj = (int(round(v * cfg.K)) for v in approx.pixel)
    col0, row0 = max(0, ci - half), max(0, cj - half)
    col1, row1 = min(width, ci + half + 1), min(height, cj + half + 1)
    if col1 - col0 < 4 or row1 - row0 < 4:
        return None
    job = RenderJob(rig, board, cfg.K, cfg.samples, cfg.seed)
    raw = render_positional(job, (col0, row0, col1 - col0, row1 - row0))
    J = normalize_positional(raw).data[..., :2]
    part = split_microlens_images(J.shape[:2], rig, cfg.K, origin=(col0, row0))
    lenses = None if approx.lens is None else [approx.lens]
    res = extract(J, board, replace(extraction, K=cfg.K), part, origin=(col0, row0),
                  points=[approx.k], lenses=lenses)
    return res.correspondences[0] if res.correspondences else None


def reference_solution(rig: CameraRig, board: PatternBoard, cfg: ReferenceConfig = ReferenceConfig(),
                       extraction: ExtractionConfig = ExtractionConfig()) -> list:
    out = []
    for c in candidate_corners(rig, board, cfg, extraction):
        ref = refine(rig, board, c, cfg, extraction)
        if ref is not None:
            out.append(ref)
    out.sort(key=sort_key)
    return out


def errors_against(found: list, reference: list) -> np.ndarray:
    """Pixel distances of ``found`` entries to the reference entry with the same (lens, k)."""
    index = {c.key: c for c in reference}
    return np.array([np.hypot(c.pixel[0] - index[c.key].pixel[0], c.pixel[1] - index[c.key].pixel[1])
                     for c in found if c.key in index])
