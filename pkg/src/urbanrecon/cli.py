"""Command-line entry point.

Reads a point cloud (and optionally footprints or per-point instance
labels), reconstructs every building and writes ``buildings.obj`` plus
``records.ndjson`` into the output directory.

Exit codes: 0 at least one building reconstructed, 1 every building
failed, 2 unreadable input, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import WALL_SOURCES, resolve_config
from .errors import ConfigError, ParseError, UnsupportedFormat
from .exports import write_ndjson, write_obj
from .ingest import PointCloud, read_footprints, read_points
from .metrics import summarize
from .pipeline import reconstruct_scene


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="urbanrecon",
        description="Reconstruct compact watertight building models "
        "from an airborne point cloud.",
    )
    p.add_argument("--input", required=True, help="point cloud (.xyz or .ply)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--footprints", help="building outlines (.geojson or .wkt)")
    p.add_argument("--labels", help="per-point instance labels, one integer per line")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--resolution", type=float, help="height map resolution in meters")
    p.add_argument("--epsilon-d", dest="epsilon_d", type=float,
                   help="contour fit tolerance in meters")
    p.add_argument("--epsilon-c", dest="epsilon_c", type=float,
                   help="contour simplification budget")
    p.add_argument("--lambda-d", dest="lambda_data", type=float,
                   help="data fidelity weight")
    p.add_argument("--lambda-c", dest="lambda_complexity", type=float,
                   help="model complexity weight")
    p.add_argument("--lambda-r", dest="lambda_roof", type=float,
                   help="roof preference weight")
    p.add_argument("--time-limit", dest="time_limit", type=float,
                   help="face selection time limit per building, seconds")
    p.add_argument("--threads", type=int, help="worker threads for scene runs")
    p.add_argument("--min-points", dest="min_points", type=int,
                   help="skip buildings with fewer points")
    p.add_argument("--wall-source", dest="wall_source", choices=WALL_SOURCES,
                   help="where outer walls come from")
    p.add_argument("--seed", type=int, help="seed recorded in the run config")
    p.add_argument("--triangulate", action=argparse.BooleanOptionalAction,
                   default=None, help="write triangle faces instead of polygons")
    p.add_argument("--dump-debug", action="store_true",
                   help="write per-building height maps, wall traces and candidates")
    return p


_OVERRIDE_KEYS = (
    "resolution", "epsilon_d", "epsilon_c", "lambda_data", "lambda_complexity",
    "lambda_roof", "time_limit", "threads", "min_points", "wall_source",
    "seed", "triangulate",
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(
            args.config, {k: getattr(args, k) for k in _OVERRIDE_KEYS}
        )
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3

    try:
        cloud = read_points(args.input)
    except (ParseError, UnsupportedFormat, OSError) as exc:
        print(f"cannot read {args.input}: {exc}", file=sys.stderr)
        return 2

    if args.labels:
        try:
            labels = np.loadtxt(args.labels, dtype=int, ndmin=1)
        except (OSError, ValueError) as exc:
            print(f"cannot read {args.labels}: {exc}", file=sys.stderr)
            return 2
        if len(labels) != len(cloud):
            print(
                f"{args.labels}: {len(labels)} labels for {len(cloud)} points",
                file=sys.stderr,
            )
            return 2
        cloud = PointCloud(cloud.xyz, cloud.normals, labels)

    footprints = None
    if args.footprints:
        try:
            footprints = read_footprints(args.footprints)
        except (ParseError, UnsupportedFormat, OSError) as exc:
            print(f"cannot read {args.footprints}: {exc}", file=sys.stderr)
            return 2
        if not footprints:
            if cloud.labels is not None:
                print(
                    f"warning: {args.footprints} has no footprints, "
                    "falling back to instance labels",
                    file=sys.stderr,
                )
                footprints = None
            else:
                print(
                    f"{args.footprints} contains no footprints and the cloud "
                    "has no instance labels",
                    file=sys.stderr,
                )
                return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    debug_dir = None
    if args.dump_debug:
        debug_dir = out / "debug"
        debug_dir.mkdir(exist_ok=True)

    results = reconstruct_scene(
        cloud, footprints=footprints, config=cfg, debug_dir=debug_dir
    )

    records = [r.record for r in results]
    write_ndjson(out / "records.ndjson", records)
    ok = [r for r in results if r.record["status"] == "ok"]
    if ok:
        write_obj(
            out / "buildings.obj",
            [(r.building_id, r.mesh) for r in ok],
            triangulate=cfg.triangulate,
        )

    for rec in records:
        if rec["status"] == "ok":
            print(
                f"{rec['id']} ok faces={rec['n_faces']} "
                f"rmse={rec['rmse']:.3f} t={rec['seconds']:.2f}s"
            )
        else:
            print(f"{rec['id']} {rec['status']} {rec.get('error', '')}")
    stats = summarize(records)
    line = f"{stats['n_buildings']} buildings, {stats['n_ok']} ok, " \
           f"{stats['n_failed']} failed"
    if "rmse_mean" in stats:
        line += f", mean rmse {stats['rmse_mean']:.3f}"
    line += f", total {stats['total_time']:.1f}s"
    print(line)
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
