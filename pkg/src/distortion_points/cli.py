"""Command line front end: ``python -m distortion_points <command> ...``.

Exit codes: 0 on success, 1 on bad input (unreadable mesh, malformed
points or config, unknown flags), 2 when the pipeline itself fails. Errors
are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import objio, param
from .cutgen import CutError
from .mesh import MeshError, cut_along
from .pipeline import (
    PipelineConfig,
    PipelineError,
    detect_points,
    final_parameterize,
    load_config,
    mst_cut,
    points_from_json,
    points_to_json,
)


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


# flag -> config key
_FLAGS = {
    "seed": "seed",
    "runs": "R",
    "min_votes": "min_votes",
    "n_ring": "n_ring",
    "e_th": "E_th",
    "nv_thres": "N_v_thres",
    "region_size": "N",
    "rho": "rho",
    "tol": "tol",
    "max_iters": "max_iters",
}


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("pipeline parameters")
    g.add_argument("--config", type=Path, help="key=value file; flags take precedence")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--runs", type=int, help="number of randomized runs R (default 10)")
    g.add_argument("--min-votes", type=int, help="votes needed to keep a point (default 3)")
    g.add_argument("--n-ring", type=int, help="suppression radius in edge hops (default 5)")
    g.add_argument("--e-th", type=float, help="first-pass distortion threshold (default 2.0)")
    g.add_argument("--nv-thres", type=int, help="simplify above this many vertices (default 13000)")
    g.add_argument("--region-size", type=int, help="override the minimum region size N")
    g.add_argument("--no-simplify", action="store_true", help="never simplify before detection")
    g.add_argument("--rho", type=float, help="handle loop perturbation (default 0.5)")
    g.add_argument("--tol", type=float, help="optimizer relative tolerance (default 1e-6)")
    g.add_argument("--max-iters", type=int, help="optimizer iteration cap (default 500)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="distortion_points", description="Detect distortion points and cut meshes through them.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="vote for distortion points")
    p.add_argument("mesh", type=Path)
    p.add_argument("-o", "--output", type=Path, help="points JSON (default stdout)")
    _add_config_flags(p)

    p = sub.add_parser("cut", help="cut a mesh through given points")
    p.add_argument("mesh", type=Path)
    p.add_argument("points", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="cut mesh OBJ")
    p.add_argument("--json", type=Path, help="cut edges as JSON")
    _add_config_flags(p)

    p = sub.add_parser("param", help="parameterize through the cut of given points")
    p.add_argument("mesh", type=Path)
    p.add_argument("points", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="UV OBJ")
    p.add_argument("--report", type=Path, help="report JSON (default stdout)")
    p.add_argument("--timings", action="store_true", help="fill timings_ms in the report")
    _add_config_flags(p)

    p = sub.add_parser("pipeline", help="detect, cut and parameterize")
    p.add_argument("mesh", type=Path)
    p.add_argument("-d", "--out-dir", type=Path, default=Path("."), help="directory for all outputs")
    p.add_argument("--timings", action="store_true", help="fill timings_ms in the report")
    _add_config_flags(p)
    return parser


def config_from_args(args) -> PipelineConfig:
    values = load_config(args.config) if args.config else {}
    for flag, key in _FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    if args.no_simplify:
        values["simplify"] = False
    return PipelineConfig.from_mapping(values)


def _load_mesh(path: Path):
    if not path.exists():
        raise InputError(f"no such file: {path}")
    try:
        mesh = objio.load_obj(path)
    except MeshError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not mesh.is_closed():
        raise InputError(f"{path}: mesh must be closed")
    return mesh


def _load_points(path: Path, mesh):
    if not path.exists():
        raise InputError(f"no such file: {path}")
    try:
        return points_from_json(path.read_text(encoding="utf-8"), mesh)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _cut_json(cut) -> str:
    edges = sorted({tuple(sorted(pair)) for p in cut for pair in p.edge_pairs().tolist()})
    return json.dumps({"edges": [list(e) for e in edges]}, indent=2) + "\n"


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _run(args) -> None:
    try:
        cfg = config_from_args(args)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None
    mesh = _load_mesh(args.mesh)
    if args.command == "detect":
        res = detect_points(mesh, cfg)
        _emit(points_to_json(res.points, mesh), args.output)
    elif args.command == "cut":
        cut = mst_cut(mesh, _load_points(args.points, mesh), cfg.seed)
        objio.save_obj(cut_along(mesh, cut), args.output)
        if args.json:
            args.json.write_text(_cut_json(cut), encoding="utf-8")
    elif args.command == "param":
        cut = mst_cut(mesh, _load_points(args.points, mesh), cfg.seed)
        pp, report = final_parameterize(mesh, cut, cfg, timings=args.timings)
        objio.save_obj(pp.disk, args.output, uv=pp.uv)
        _emit(report.to_json(), args.report)
    else:
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        res = detect_points(mesh, cfg)
        (out / "points.json").write_text(points_to_json(res.points, mesh), encoding="utf-8")
        cut = mst_cut(mesh, res.points, cfg.seed)
        (out / "cut.json").write_text(_cut_json(cut), encoding="utf-8")
        pp, report = final_parameterize(mesh, cut, cfg, timings=args.timings)
        objio.save_obj(pp.disk, out / "uv.obj", uv=pp.uv)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def run_cli(argv=None) -> int:
    """Run the command line interface and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as exc:
        return _fail(1, "usage", str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except InputError as exc:
        return _fail(1, "input", str(exc))
    except (PipelineError, CutError, MeshError, param.FlipError) as exc:
        return _fail(2, "pipeline", str(exc))
    return 0


def main() -> None:
    sys.exit(run_cli())
