"""Direct vs two-plane extraction on the thin-lens rig, both checked against
the paraxial nodal-point projection.

    python scripts/method_comparison.py [--samples 256] [--K 1] [--seed 1]
"""

import argparse
import math

import numpy as np

from plenogt import presets
from plenogt.extraction import ExtractionConfig, compare_correspondences, extract_direct, extract_two_plane
from plenogt.oracle import PinholeOracle, pinhole_project
from plenogt.render import RenderJob, normalize_positional, plane_points, render_positional, render_proxy_planes


def oracle_errors(oracle, corrs, board):
    ref = pinhole_project(oracle, board.points_of_interest)
    return np.array([math.hypot(c.pixel[0] - ref[c.k][0], c.pixel[1] - ref[c.k][1]) for c in corrs])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=256)
    ap.add_argument("--K", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    rig = presets.thin_lens_rig()
    oracle = PinholeOracle.paraxial(rig)
    near, far = render_proxy_planes(rig, presets.thin_lens_planes(rig), args.K, args.samples, args.seed)
    wn, wf = plane_points(near), plane_points(far)
    print(f"{'pose':>4} {'direct':>6} {'2-plane':>7} {'mean |d|':>9} {'err direct':>10} {'err 2-plane':>11}")
    for i, board in enumerate(presets.thin_lens_boards(rig)):
        job = RenderJob(rig, board, args.K, args.samples, args.seed)
        J = normalize_positional(render_positional(job)).data[..., :2]
        a = extract_direct(J, board, ExtractionConfig(K=args.K), rig).correspondences
        b = extract_two_plane(wn, wf, board, ExtractionConfig(K=args.K, method="two-plane"),
                              rig).correspondences
        rep = compare_correspondences(a, b)
        print(f"{i:4d} {len(a):6d} {len(b):7d} {rep['mean_abs_diff_px']:9.2e} "
              f"{oracle_errors(oracle, a, board).mean():10.4f} {oracle_errors(oracle, b, board).mean():11.4f}")


if __name__ == "__main__":
    main()
