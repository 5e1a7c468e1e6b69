"""Command-line interface: ``surfremesh mesh|compare|sizefield|report``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time

from . import __version__
from .meshio import MeshFormatError, read_mesh, write_mesh, write_tets_off
from .metrics import compare, quality_report, write_facet_csv
from .refine import RefineConfig, RefineError, run, write_trace
from .restricted import manifoldness_report
from .sizing import SizeField, SizeFieldError, build_field, estimate_lfs
from .surface import SurfacePolyhedron, SurfaceValidationError

log = logging.getLogger("surfremesh")

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 1, 2


class InputError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(path, obj):
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_surface(path):
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    try:
        return SurfacePolyhedron.from_file(path)
    except (MeshFormatError, SurfaceValidationError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _parse_h(value):
    """--h is either a number or the path of a size-field file."""
    if value is None:
        return None, None
    try:
        h = float(value)
    except ValueError:
        if not os.path.exists(value):
            raise InputError(f"size field file not found: {value}") from None
        return None, value
    if not (h > 0 and math.isfinite(h)):
        raise InputError(f"--h must be a positive length (got {value})")
    return h, None


def _make_field(surf, args):
    h, path = _parse_h(args.h)
    try:
        if path is not None:
            return SizeField.load(path, surf), {"field_file": path, "field_sha256": _sha256(path)}
        user = h if h is not None else math.inf
        field = build_field(surf, user_h=user, epsilon=args.lfs_eps, g=args.grad_limit)
    except SizeFieldError as exc:
        raise InputError(str(exc)) from None
    return field, {"user_h": h, "lfs_eps": args.lfs_eps, "grad_limit": args.grad_limit}


def _config(args, algorithm):
    try:
        return RefineConfig(rho_max=args.rho, eps_ratio=args.eps_ratio, algorithm=algorithm,
                            max_inserts=args.max_inserts, seed_count=args.seeds)
    except RefineError as exc:
        raise InputError(str(exc)) from None


def _report_of(res):
    rep = dict(res.report)
    rep["topology"] = res.complex.manifoldness_report()
    return rep


# -- commands ---------------------------------------------------------------


def cmd_mesh(args):
    t0 = time.perf_counter()
    surf = _load_surface(args.input)
    cfg = _config(args, args.algorithm)
    field, field_params = _make_field(surf, args)
    res = run(surf, field, cfg)
    write_mesh(args.out, res.vertices, res.triangles)
    if args.out_vol:
        write_tets_off(args.out_vol, res.volume_vertices, res.volume_tets)
    if args.report:
        _dump_json(args.report, _report_of(res))
    if args.facet_csv:
        write_facet_csv(args.facet_csv, res.vertices, res.triangles)
    if args.trace and args.trace != "off":
        write_trace(args.trace, res.trace)
    manifest = {
        "tool": "surfremesh",
        "version": __version__,
        "command": "mesh",
        "input": {"path": args.input, "sha256": _sha256(args.input)},
        "config": res.config,
        "size_field": field_params,
        "deterministic": True,
        "converged": res.converged,
        "stats": {k: v for k, v in res.stats.items() if "seconds" not in k},
        "timings": {"refine_seconds": res.stats["seconds"],
                    "total_seconds": time.perf_counter() - t0},
    }
    _dump_json(args.manifest or args.out + ".manifest.json", manifest)
    if not res.converged:
        print(f"refinement hit the insert cap ({cfg.max_inserts}) before converging", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


def cmd_compare(args):
    surf = _load_surface(args.input)
    pairs = []
    status = EXIT_OK
    for g in args.grad_limit:
        sub = argparse.Namespace(**vars(args))
        sub.grad_limit = g
        field, field_params = _make_field(surf, sub)
        arms = {}
        for alg in ("dr", "fd"):
            res = run(surf, field, _config(args, alg))
            arms[alg] = res
            if not res.converged:
                status = EXIT_CAP
            if args.out_dir:
                os.makedirs(args.out_dir, exist_ok=True)
                write_mesh(os.path.join(args.out_dir, f"{alg}_g{g}.off"), res.vertices, res.triangles)
        dr, fd = arms["dr"], arms["fd"]
        pair = compare(dr.report, fd.report, dr.stats["total_seconds"], fd.stats["total_seconds"])
        pair["size_field"] = field_params
        pair["converged"] = {"dr": dr.converged, "fd": fd.converged}
        pairs.append(pair)
        print(f"g={g}: mean a(f) DR {pair['dr']['mean_a']:.4f} FD {pair['fd']['mean_a']:.4f} | "
              f"MAD DR {pair['dr']['mad']:.2f} FD {pair['fd']['mad']:.2f} | "
              f"|T| DR {pair['dr']['triangles']} FD {pair['fd']['triangles']} | "
              f"time DR {pair['dr']['seconds']:.1f}s FD {pair['fd']['seconds']:.1f}s")
    out = {"input": {"path": args.input, "sha256": _sha256(args.input)}, "pairs": pairs}
    if args.report:
        _dump_json(args.report, out)
    return status


def cmd_sizefield(args):
    surf = _load_surface(args.input)
    lfs = estimate_lfs(surf)
    h, _ = _parse_h(args.h)
    try:
        field = build_field(surf, lfs, user_h=h if h is not None else math.inf,
                            epsilon=args.lfs_eps, g=args.grad_limit)
    except SizeFieldError as exc:
        raise InputError(str(exc)) from None
    field.save(args.out)
    if args.dump_lfs:
        with open(args.dump_lfs, "w") as fh:
            fh.write("x y z lfs fallback\n")
            for p, v, fb in zip(surf.vertices.tolist(), lfs.values.tolist(), lfs.fallback.tolist()):
                fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r} {v!r} {int(fb)}\n")
    if lfs.fallback.any():
        print(f"{int(lfs.fallback.sum())} vertices had no pole; used nearest-triangle distance",
              file=sys.stderr)
    return EXIT_OK


def cmd_report(args):
    if not os.path.exists(args.input):
        raise InputError(f"input file not found: {args.input}")
    try:
        V, F = read_mesh(args.input)
    except MeshFormatError as exc:
        raise InputError(str(exc)) from None
    surf = _load_surface(args.surface) if args.surface else None
    field = None
    h, path = _parse_h(args.h)
    if path is not None:
        host = surf if surf is not None else _load_surface(args.input)
        try:
            field = SizeField.load(path, host)
        except SizeFieldError as exc:
            raise InputError(str(exc)) from None
    elif h is not None:
        field = lambda p, h=h: h  # noqa: E731
    rep = quality_report(V, F, field=field, surf=surf)
    rep["topology"] = manifoldness_report(F.tolist())
    if args.facet_csv:
        write_facet_csv(args.facet_csv, V, F)
    _dump_json(args.report or "-", rep)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------


def _common(p, algorithm=True):
    p.add_argument("--in", dest="input", required=True, help="input surface (.off or .obj)")
    if algorithm:
        p.add_argument("--out", required=True, help="output surface mesh (.off or .obj)")
        p.add_argument("--algorithm", choices=("dr", "fd"), default="fd")
    p.add_argument("--rho", type=float, default=1.0, help="radius-edge bound (>= 1)")
    p.add_argument("--h", default=None, help="target edge length: a number or a size-field file")
    p.add_argument("--eps-ratio", type=float, default=0.25,
                   help="surface error bound as a fraction of the target size")
    p.add_argument("--lfs-eps", type=float, default=0.5, help="geometric size as a fraction of lfs")
    p.add_argument("--seeds", type=int, default=None, help="initial sample size")
    p.add_argument("--max-inserts", type=int, default=500_000, help="cap on Steiner insertions")
    p.add_argument("--report", default=None, help="quality report JSON path ('-' for stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="surfremesh", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="remesh a closed surface")
    _common(p)
    p.add_argument("--grad-limit", type=float, default=0.2, help="size-field Lipschitz bound g")
    p.add_argument("--trace", default="off", help="per-insert CSV trace path, or 'off'")
    p.add_argument("--out-vol", default=None, help="coarse volume mesh output")
    p.add_argument("--facet-csv", default=None, help="per-facet quality rows (CSV)")
    p.add_argument("--manifest", default=None, help="run manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("compare", help="run DR and FD side by side")
    _common(p, algorithm=False)
    p.add_argument("--grad-limit", type=float, nargs="+", default=[0.2],
                   help="one or more Lipschitz bounds; one paired run each")
    p.add_argument("--out-dir", default=None, help="directory for the output meshes")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sizefield", help="build and save a size field")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--lfs-eps", type=float, default=0.5)
    p.add_argument("--grad-limit", type=float, default=0.2)
    p.add_argument("--h", default=None, help="constant user size bound")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-lfs", default=None, help="write per-vertex lfs values here")
    p.set_defaults(func=cmd_sizefield)

    p = sub.add_parser("report", help="quality report of an existing mesh")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--h", default=None, help="target size: a number or a size-field file")
    p.add_argument("--surface", default=None,
                   help="reference surface (hosts a size-field file; adds normal deviation)")
    p.add_argument("--report", default=None, help="output path (default stdout)")
    p.add_argument("--facet-csv", default=None, help="per-facet quality rows (CSV)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
