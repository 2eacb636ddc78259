"""Rendering vs extraction time on the plenoptic rig.

    python scripts/timing.py [--size 256] [--samples 64]

Set PLENOGT_NUM_THREADS to control the number of render threads.
"""

import argparse
import time

from plenogt import presets
from plenogt.extraction import ExtractionConfig, extract_two_plane
from plenogt.render import plane_points, render_proxy_planes
from plenogt.scene import ProxyPlanePair


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--samples", type=int, default=64, help="side of the square sample count")
    args = ap.parse_args(argv)

    rig, board = presets.plenoptic_rig(size=args.size), presets.plenoptic_board()
    pair = ProxyPlanePair.at_depths(450.0, 650.0)
    render_proxy_planes(presets.plenoptic_rig(size=8), pair, 1, 4, 1)  # compile
    n = args.samples ** 2
    t0 = time.perf_counter()
    near, far = render_proxy_planes(rig, pair, 1, n, 1)
    t_render = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = extract_two_plane(plane_points(near), plane_points(far), board,
                            ExtractionConfig(method="two-plane"), rig)
    t_extract = time.perf_counter() - t0
    rays = args.size ** 2 * n
    print(f"render {args.size}x{args.size} at {n} samples: {t_render:.2f} s "
          f"({rays / t_render / 1e6:.2f} Mrays/s)")
    print(f"two-plane extraction: {t_extract:.3f} s, {len(res.correspondences)} correspondences")
    print(f"render / extract: {t_render / t_extract:.0f}x")


if __name__ == "__main__":
    main()
