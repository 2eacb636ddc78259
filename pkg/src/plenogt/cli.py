"""Command line entry point: ``plenogt <subcommand> ...``.

Errors are reported on stderr as one JSON object and a non-zero exit code.
Set ``PLENOGT_NUM_THREADS`` to choose the render thread count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .extraction import (
    Correspondence,
    compare_correspondences,
    extract_direct,
    extract_two_plane,
)
from .io import (
    FormatError,
    read_correspondences,
    read_image,
    write_correspondences,
    write_image,
    write_json,
)
from .oracle import PinholeOracle, pinhole_project
from .render import (
    RenderJob,
    Tag,
    normalize_positional,
    plane_points,
    render_color,
    render_positional,
    render_proxy_planes,
)


class CliError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


def _settings(args, cfg):
    seed = cfg.render.seed if args.seed is None else args.seed
    samples = cfg.render.samples if getattr(args, "samples", None) is None else args.samples
    K = cfg.render.K if getattr(args, "K", None) is None else args.K
    return K, samples, seed


def _mkparent(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def cmd_render_color(args):
    cfg = load_config(args.config)
    _, samples, seed = _settings(args, cfg)
    img = render_color(RenderJob(cfg.rig, cfg.board(args.pose), 1, samples, seed))
    img.meta["pose"] = str(args.pose)
    _mkparent(args.out)
    write_image(args.out, img)


def cmd_render_positional(args):
    cfg = load_config(args.config)
    K, samples, seed = _settings(args, cfg)
    raw = render_positional(RenderJob(cfg.rig, cfg.board(args.pose), K, samples, seed))
    img = normalize_positional(raw)
    img.meta["pose"] = str(args.pose)
    _mkparent(args.out)
    write_image(args.out, img)


def cmd_render_planes(args):
    cfg = load_config(args.config)
    if cfg.planes is None:
        raise CliError("config", "config has no planes section")
    K, samples, seed = _settings(args, cfg)
    near, far = render_proxy_planes(cfg.rig, cfg.planes, K, samples, seed)
    for path, img in ((args.out_near, near), (args.out_far, far)):
        _mkparent(path)
        write_image(path, img)


def _check_rig(img, cfg, path):
    if img.meta.get("rig") != cfg.rig.fingerprint():
        raise CliError("rig-mismatch", f"{path} was rendered with a different rig",
                       image_rig=img.meta.get("rig"), config_rig=cfg.rig.fingerprint())


def cmd_extract(args):
    cfg = load_config(args.config)
    board = cfg.board(args.pose)
    if args.method == "direct":
        if args.positional is None:
            raise CliError("usage", "--positional is required for method direct")
        img = read_image(args.positional)
        _check_rig(img, cfg, args.positional)
        if img.tag != Tag.UV_POSITIONAL:
            raise CliError("format", f"{args.positional} is not a uvw-positional image")
        if not img.meta.get("normalized"):
            img = normalize_positional(img)
        ex = cfg.extraction.__class__(**{**cfg.extraction.__dict__, "K": int(img.meta["K"]),
                                         "method": "direct"})
        result = extract_direct(img.data[..., :2], board, ex, cfg.rig)
    else:
        if args.near is None or args.far is None:
            raise CliError("usage", "--near and --far are required for method two-plane")
        near, far = read_image(args.near), read_image(args.far)
        for path, img in ((args.near, near), (args.far, far)):
            _check_rig(img, cfg, path)
            if img.tag != Tag.PLANE_POSITIONAL:
                raise CliError("format", f"{path} is not a plane-positional image")
        if near.meta["K"] != far.meta["K"] or near.data.shape != far.data.shape:
            raise CliError("format", "near and far images differ in scale or size")
        ex = cfg.extraction.__class__(**{**cfg.extraction.__dict__, "K": int(near.meta["K"]),
                                         "method": "two-plane"})
        result = extract_two_plane(plane_points(near), plane_points(far), board, ex, cfg.rig)
    _mkparent(args.out)
    write_correspondences(args.out, result.correspondences)


def cmd_compare(args):
    report = compare_correspondences(read_correspondences(args.a), read_correspondences(args.b))
    _mkparent(args.report)
    write_json(args.report, report)


def cmd_oracle(args):
    cfg = load_config(args.config)
    board = cfg.board(args.pose)
    try:
        if args.model == "paraxial":
            oracle = PinholeOracle.paraxial(cfg.rig)
        else:
            oracle = PinholeOracle.from_rig(cfg.rig)
    except ValueError as exc:
        raise CliError("not-pinhole", str(exc)) from exc
    px = pinhole_project(oracle, board.points_of_interest)
    rows = [Correspondence(k=k, lens=None, pixel=(float(x), float(y)),
                           world=board.points_of_interest[k], board_uv=board.points_uv[k],
                           method="oracle", filter_passed=None)
            for k, (x, y) in enumerate(px)]
    _mkparent(args.out)
    write_correspondences(args.out, rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plenogt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pose=True, scale=False):
        p.add_argument("--config", required=True)
        if pose:
            p.add_argument("--pose", default="0", help="pose index or name")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--samples", type=int, default=None, help="override samples per pixel")
        if scale:
            p.add_argument("-K", type=int, default=None, dest="K", help="resolution scale")

    p = sub.add_parser("render-color", help="colour image I")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_color)

    p = sub.add_parser("render-positional", help="normalized UV positional image of the board")
    common(p, scale=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_positional)

    p = sub.add_parser("render-planes", help="proxy-plane images J_near and J_far")
    common(p, pose=False, scale=True)
    p.add_argument("--out-near", required=True)
    p.add_argument("--out-far", required=True)
    p.set_defaults(func=cmd_render_planes)

    p = sub.add_parser("extract", help="ground-truth correspondences")
    p.add_argument("--method", choices=["direct", "two-plane"], default="direct")
    p.add_argument("--config", required=True)
    p.add_argument("--pose", default="0")
    p.add_argument("--positional")
    p.add_argument("--near")
    p.add_argument("--far")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("compare", help="statistics between two correspondence files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="analytic pinhole projection of the board points")
    p.add_argument("--config", required=True)
    p.add_argument("--pose", default="0")
    p.add_argument("--model", choices=["pinhole", "paraxial"], default="pinhole",
                   help="pinhole: point-stop rigs only; paraxial: nodal-point projection")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)
    return parser


def _fail(kind: str, message: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc), violations=exc.violations)
    except CliError as exc:
        return _fail(exc.kind, str(exc), **exc.extra)
    except FormatError as exc:
        return _fail("format", str(exc))
    except (FileNotFoundError, KeyError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
