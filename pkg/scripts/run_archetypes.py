#!/usr/bin/env python3
"""Benchmark the pipeline on the six synthetic archetypes.

Reconstructs every archetype across several seeds and prints accuracy
and compactness per archetype plus a suite summary. With ``--out`` the
meshes and run records are written as well.
"""

import argparse
import statistics
import time
from pathlib import Path

from urbanrecon.config import PipelineConfig
from urbanrecon.exports import write_ndjson, write_obj
from urbanrecon.pipeline import reconstruct_scene
from urbanrecon.synth import SynthSpec, build_scene

SUITE = (
    ("flat", {}),
    ("gable", {"origin": (20, 0)}),
    ("twotier", {"origin": (40, 0)}),
    ("hip", {"origin": (0, 20), "width": 12, "depth": 8}),
    ("lshape", {"origin": (20, 20)}),
    ("overhang", {"origin": (40, 20)}),
)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--density", type=float, default=8.0,
                   help="points per square meter of plan area")
    p.add_argument("--noise", type=float, default=0.05,
                   help="sigma along the facet normal, meters")
    p.add_argument("--wall-source", default="auto",
                   choices=("auto", "footprint", "inferred"),
                   help="where outer walls come from")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="directory for OBJ and NDJSON outputs")
    args = p.parse_args(argv)

    cfg = PipelineConfig(wall_source=args.wall_source,
                         threads=args.threads).validate()
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    by_arch = {name: [] for name, _ in SUITE}
    records = []
    t0 = time.perf_counter()
    for seed in range(args.seeds):
        specs = [SynthSpec(archetype=name, density=args.density,
                           noise=args.noise, ground_ring=True, **kw)
                 for name, kw in SUITE]
        cloud, footprints, _ = build_scene(specs, seed=seed)
        results = reconstruct_scene(cloud, footprints, config=cfg)
        by_id = {r.record["id"]: r for r in results}
        for bi, spec in enumerate(specs):
            res = by_id[str(bi)]
            rec = dict(res.record, archetype=spec.archetype, seed=seed)
            records.append(rec)
            by_arch[spec.archetype].append(rec)
        if out:
            meshes = [(r.record["id"], r.mesh) for r in results
                      if r.record["status"] == "ok"]
            write_obj(out / f"archetypes_s{seed}.obj", meshes)
    elapsed = time.perf_counter() - t0

    print(f"{'archetype':<10} {'ok':>5} {'rmse mean':>10} {'rmse max':>9} "
          f"{'faces':>6} {'sec':>6}")
    for name, _ in SUITE:
        recs = by_arch[name]
        ok = [r for r in recs if r["status"] == "ok"]
        if not ok:
            print(f"{name:<10} {0:>2}/{len(recs)}  all failed")
            continue
        rmses = [r["rmse"] for r in ok]
        faces = [r["n_faces"] for r in ok]
        secs = [r["seconds"] for r in ok]
        print(f"{name:<10} {len(ok):>2}/{len(recs)} "
              f"{statistics.mean(rmses):>10.3f} {max(rmses):>9.3f} "
              f"{statistics.mean(faces):>6.1f} {statistics.mean(secs):>6.2f}")

    all_ok = [r for r in records if r["status"] == "ok"]
    if all_ok:
        rmses = sorted(r["rmse"] for r in all_ok)
        print(f"suite: {len(all_ok)}/{len(records)} ok, "
              f"rmse max {rmses[-1]:.3f}, median {statistics.median(rmses):.3f}, "
              f"mean faces {statistics.mean([r['n_faces'] for r in all_ok]):.1f}, "
              f"total {elapsed:.1f} s")
    if out:
        write_ndjson(out / "records.ndjson", records)
        print(f"wrote {out}/")
    return 0 if len(all_ok) == len(records) else 1


if __name__ == "__main__":
    raise SystemExit(main())
