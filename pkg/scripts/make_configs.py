"""Write the bundled run configurations in configs/ from the preset rigs.

    python scripts/make_configs.py [--out configs]
"""

import argparse
import json
from pathlib import Path

from plenogt import presets
from plenogt.scene import ProxyPlanePair


def _pose(name, pose):
    return {"name": name, "center": list(pose.center), "rotation_deg": list(pose.rotation_deg)}


def _planes(pair: ProxyPlanePair):
    return {"fixed_axis": pair.fixed_axis, "near": pair.near_value, "far": pair.far_value}


def pinhole_config():
    return {
        "version": 1,
        "camera": presets.as_config(presets.pinhole_rig()),
        "scene": {"board": {"kind": "checkerboard", "rows": 4, "cols": 7, "size": 2.5},
                  "poses": [_pose(f"p{k}", p) for k, p in enumerate(presets.PINHOLE_POSES)]},
        "render": {"K": 8, "samples": 128 ** 2, "seed": 1, "output_dir": "out/pinhole"},
        "extraction": {"lam_d": 0.15, "lam_alpha_deg": 10.0},
        "planes": _planes(ProxyPlanePair.at_depths(8000.0, 15000.0)),
    }


def thin_lens_config():
    rig = presets.thin_lens_rig()
    return {
        "version": 1,
        "camera": presets.as_config(rig),
        "scene": {"board": {"kind": "checkerboard", "rows": 4, "cols": 7, "size": 5.0},
                  "poses": [_pose(f"t{k}", p) for k, p in enumerate(presets.thin_lens_poses(rig))]},
        "render": {"K": 1, "samples": 256, "seed": 1, "output_dir": "out/thin_lens"},
        "extraction": {"lam_d": 0.15, "lam_alpha_deg": 10.0},
        "planes": _planes(presets.thin_lens_planes(rig)),
    }


def plenoptic_config():
    return {
        "version": 1,
        "camera": presets.as_config(presets.plenoptic_rig()),
        "scene": {"board": {"kind": "checkerboard", "rows": 4, "cols": 7, "size": 0.4,
                            "background": list(presets.GRAY)},
                  "poses": [_pose("front", presets.PLENOPTIC_POSE)]},
        "render": {"K": 1, "samples": 64 ** 2, "seed": 1, "output_dir": "out/plenoptic"},
        "extraction": {"lam_d": 0.15, "lam_alpha_deg": 10.0},
        "planes": _planes(ProxyPlanePair.at_depths(450.0, 650.0)),
    }


CONFIGS = {"pinhole": pinhole_config, "thin_lens": thin_lens_config,
           "plenoptic": plenoptic_config}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "configs"))
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in CONFIGS.items():
        path = out / f"{name}.json"
        path.write_text(json.dumps(make(), indent=2) + "\n")
        print(path)


if __name__ == "__main__":
    main()
