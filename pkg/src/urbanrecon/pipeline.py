"""End-to-end reconstruction: points in, watertight meshes out.

``reconstruct_building`` runs the full chain for one instance: plane
detection, roof height mapping, wall tracing, candidate generation,
face selection and mesh extraction.  ``reconstruct_scene`` splits a
cloud into instances (by footprint or label), runs them in a thread
pool and returns records sorted by building id so output is identical
for any thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .candidates import build_candidates
from .config import PipelineConfig
from .errors import ConfigError, NoRoofPlanes, TooFewPoints, UrbanReconError
from .exports import write_candidates_obj, write_pgm, write_wkt_lines
from .geom import Polygon2, SurfaceMesh, seg_points_distance
from .heightfield import build_tin, detect_contours, morph_close, rasterize
from .ingest import (
    PointCloud,
    estimate_ground_z,
    split_by_footprints,
    split_by_instance_labels,
)
from .metrics import rmse, validate_mesh
from .planes import classify_segments, default_dist_tol, estimate_normals, region_grow
from .selection import extract_mesh, solve
from .walltrace import extrude, regularize, simplify_contours, stitch_chains


@dataclass
class BuildingResult:
    building_id: str
    record: dict
    mesh: SurfaceMesh | None = None


def _bbox_polygon(xyz) -> Polygon2:
    lo = xyz[:, :2].min(axis=0)
    hi = xyz[:, :2].max(axis=0)
    return Polygon2.create(
        [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
    )


def reconstruct_building(
    building_id: str,
    xyz,
    scene_xyz=None,
    footprint: Polygon2 | None = None,
    config: PipelineConfig | None = None,
    debug_dir=None,
) -> BuildingResult:
    cfg = config or PipelineConfig().validate()
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    if len(xyz) < cfg.min_points:
        raise TooFewPoints(
            f"building {building_id}: {len(xyz)} points, need {cfg.min_points}"
        )
    if scene_xyz is None:
        scene_xyz = xyz
    if cfg.wall_source == "footprint" and footprint is None:
        raise ConfigError("wall_source=footprint but no footprint was given")
    use_footprint = footprint is not None and cfg.wall_source != "inferred"
    fp = footprint if use_footprint else None

    t0 = time.perf_counter()
    normals, neighbor_idx = estimate_normals(xyz, k=cfg.k_neighbors)
    dist_tol = cfg.dist_tol if cfg.dist_tol is not None else default_dist_tol(xyz)
    segments = region_grow(
        xyz,
        normals=normals,
        neighbor_idx=neighbor_idx,
        k=cfg.k_neighbors,
        angle_tol_deg=cfg.angle_tol_deg,
        dist_tol=dist_tol,
        min_support=cfg.min_support,
    )
    roofs, _ = classify_segments(segments, cfg.vertical_angle_tol_deg)

    ground_poly = fp if fp is not None else _bbox_polygon(xyz)
    z_ground = estimate_ground_z(scene_xyz, ground_poly)

    # horizontal planes at ground level are terrain, not roof
    roofs = [
        s for s in roofs
        if float(np.median(xyz[s.indices, 2])) > z_ground + cfg.min_roof_height
    ]
    if not roofs:
        raise NoRoofPlanes(
            f"building {building_id}: no planar regions above ground level"
        )

    # height map from roof inliers only: wall returns would smear the
    # very discontinuities the contour stage needs
    roof_idx = np.unique(np.concatenate([s.indices for s in roofs]))
    tin = build_tin(xyz[roof_idx])
    hm = rasterize(tin, cfg.resolution, footprint=fp, background=z_ground)
    hm = morph_close(hm, kernel=cfg.morph_kernel)
    contours = detect_contours(hm, low=cfg.canny_low, high=cfg.canny_high)

    # with a known footprint the boundary jump is already explained by
    # the outer walls; only interior contour evidence matters
    pixels = contours.pixels
    if fp is not None and len(pixels):
        dmin = np.full(len(pixels), np.inf)
        for a, b in fp.edges():
            dmin = np.minimum(dmin, seg_points_distance(pixels, a, b))
        pixels = pixels[dmin > 2.5 * cfg.resolution]

    if len(pixels):
        polylines, tstats = simplify_contours(
            pixels,
            eps_d=cfg.epsilon_d,
            eps_c=cfg.epsilon_c,
            min_group=cfg.min_edge_group,
        )
    else:
        polylines, tstats = [], None
    # the pixel tracer can leave a one-pixel gap where chains split
    polylines = stitch_chains(polylines, join_tol=2.0 * cfg.resolution)
    polylines = regularize(
        polylines, footprint=fp, angle_tol_deg=cfg.angle_tol_deg,
        offset_tol=cfg.offset_tol,
    )
    walls = extrude(
        polylines, z_ground, footprint=fp, resolution=cfg.resolution, stats=tstats,
        min_evidence=3.0 * cfg.resolution,
    )

    cs = build_candidates(
        roofs,
        walls,
        xyz,
        normals=normals,
        dist_tol=dist_tol,
        angle_tol_deg=cfg.angle_tol_deg,
        min_cell_area=cfg.min_face_area,
        snap=cfg.snap_tol,
    )
    if debug_dir is not None:
        write_pgm(f"{debug_dir}/{building_id}_height.pgm", hm)
        write_wkt_lines(f"{debug_dir}/{building_id}_walls.wkt", polylines)
        write_candidates_obj(f"{debug_dir}/{building_id}_candidates.obj", cs)

    sol = solve(
        cs,
        weights=cfg.weights(),
        face_prior=cfg.face_prior,
        time_limit=cfg.time_limit,
    )
    mesh = extract_mesh(cs, sol.assignment, merge_coplanar=cfg.merge_coplanar)
    report = validate_mesh(mesh)
    err = rmse(xyz, mesh)
    elapsed = time.perf_counter() - t0

    record = {
        "id": building_id,
        "status": "ok",
        "n_points": int(len(xyz)),
        "n_roof_planes": int(len(roofs)),
        "n_wall_lines": int(len(walls.lines)),
        "n_inner_walls": int(sum(1 for ln in walls.lines if not ln.outer)),
        "n_candidates": int(len(cs.faces)),
        "n_faces": int(report["n_faces"]),
        "n_vertices": int(report["n_vertices"]),
        "rmse": float(err),
        "volume": float(report["volume"]),
        "watertight": bool(report["watertight"]),
        "valid": bool(report["valid"]),
        "objective": float(sol.objective),
        "data_term": float(sol.data_term),
        "complexity_term": float(sol.complexity_term),
        "roof_term": float(sol.roof_term),
        "solver_nodes": int(sol.nodes),
        "solver_status": sol.status,
        "wall_source": "footprint" if use_footprint else "inferred",
        "wall_stats": asdict(tstats) if tstats is not None else None,
        "seconds": float(elapsed),
    }
    return BuildingResult(building_id, record, mesh)


def _run_one(building_id, xyz, scene_xyz, footprint, config, debug_dir):
    try:
        return reconstruct_building(
            building_id, xyz, scene_xyz, footprint, config, debug_dir
        )
    except UrbanReconError as exc:
        record = {
            "id": building_id,
            "status": "failed",
            "n_points": int(len(xyz)),
            "error": str(exc),
            "error_type": type(exc).__name__,
        }
        return BuildingResult(building_id, record, None)


def reconstruct_scene(
    cloud: PointCloud,
    footprints=None,
    config: PipelineConfig | None = None,
    debug_dir=None,
) -> list[BuildingResult]:
    cfg = config or PipelineConfig().validate()
    fp_map = {}
    if footprints:
        assignments, skipped = split_by_footprints(
            cloud.xyz, footprints, min_points=cfg.min_points
        )
        fp_map = {f.id: f.polygon for f in footprints}
    elif cloud.labels is not None:
        assignments, skipped = split_by_instance_labels(
            cloud.labels, min_points=cfg.min_points
        )
    else:
        assignments, skipped = {"building": np.arange(len(cloud.xyz))}, {}

    jobs = sorted(assignments.items())
    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(
                pool.map(
                    lambda item: _run_one(
                        item[0],
                        cloud.xyz[item[1]],
                        cloud.xyz,
                        fp_map.get(item[0]),
                        cfg,
                        debug_dir,
                    ),
                    jobs,
                )
            )
    else:
        results = [
            _run_one(bid, cloud.xyz[idx], cloud.xyz, fp_map.get(bid), cfg, debug_dir)
            for bid, idx in jobs
        ]

    for bid in sorted(skipped):
        results.append(
            BuildingResult(
                bid,
                {
                    "id": bid,
                    "status": "skipped",
                    "n_points": int(skipped[bid]),
                    "error": f"only {skipped[bid]} points inside, need {cfg.min_points}",
                    "error_type": "TooFewPoints",
                },
                None,
            )
        )
    results.sort(key=lambda r: r.building_id)
    return results
