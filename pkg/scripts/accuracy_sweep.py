"""Extraction error against a high-resolution reference on the plenoptic rig,
swept over the scale factor K and the samples per pixel.

    python scripts/accuracy_sweep.py --K 1 2 4 --samples 64 128 256 --seeds 1 2 3

Sample counts are given as the side of the square (128 -> 128^2 rays per pixel).
Prints one row per (K, samples): mean error, SEM and detected-corner ratio.
"""

import argparse
import json
import math
import time

import numpy as np

from plenogt import presets
from plenogt.extraction import ExtractionConfig, extract_direct
from plenogt.reference import ReferenceConfig, errors_against, reference_solution
from plenogt.render import RenderJob, normalize_positional, render_positional


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, nargs="+", default=[1, 4])
    ap.add_argument("--samples", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--ref-K", type=int, default=8)
    ap.add_argument("--ref-samples", type=int, default=128)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)

    rig, board = presets.plenoptic_rig(), presets.plenoptic_board()
    t0 = time.perf_counter()
    ref = reference_solution(rig, board, ReferenceConfig(K=args.ref_K, samples=args.ref_samples ** 2))
    print(f"reference: {len(ref)} corners at K={args.ref_K}, {args.ref_samples}^2 samples "
          f"({time.perf_counter() - t0:.0f} s)")
    print(f"{'K':>3} {'samples':>8} {'mean px':>9} {'sem px':>9} {'ratio':>6} {'n':>5} {'s':>6}")
    rows = []
    for K in args.K:
        for side in args.samples:
            t0 = time.perf_counter()
            errs, ratios = [], []
            for seed in args.seeds:
                job = RenderJob(rig, board, K, side ** 2, seed)
                J = normalize_positional(render_positional(job)).data[..., :2]
                found = extract_direct(J, board, ExtractionConfig(K=K), rig).correspondences
                e = errors_against(found, ref)
                errs.append(e)
                ratios.append(len(e) / len(ref))
            e = np.concatenate(errs)
            row = {"K": K, "samples": side ** 2, "mean_px": float(e.mean()),
                   "sem_px": float(e.std(ddof=1) / math.sqrt(len(e))),
                   "ratio": float(np.mean(ratios)), "n": int(len(e)),
                   "seconds": time.perf_counter() - t0}
            rows.append(row)
            print(f"{K:3d} {side:6d}^2 {row['mean_px']:9.5f} {row['sem_px']:9.5f} "
                  f"{row['ratio']:6.3f} {row['n']:5d} {row['seconds']:6.0f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
