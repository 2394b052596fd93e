"""Synthetic building scenes with known ground truth.

Sampling mimics airborne acquisition: only upward-facing roof surfaces
receive points, uniformly in plan, so walls must be inferred downstream.
Every generator is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geom import Plane, Polygon2, fit_plane
from .ingest import Footprint, PointCloud

ARCHETYPES = ("flat", "gable", "hip", "lshape", "twotier", "overhang")


@dataclass
class SynthSpec:
    """Parameters for one synthetic building."""

    archetype: str = "flat"
    origin: tuple = (0.0, 0.0)
    width: float = 10.0
    depth: float = 8.0
    eave_z: float = 5.0
    ridge_z: float = 7.0
    ground_z: float = 0.0
    density: float = 40.0          # points per square meter of plan area
    noise: float = 0.0             # sigma along the facet normal, meters
    outlier_fraction: float = 0.0
    ground_ring: bool = False      # sample a collar of terrain around the footprint
    ground_ring_width: float = 3.0

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ConfigError(f"unknown archetype {self.archetype!r}")
        if self.width <= 0 or self.depth <= 0:
            raise ConfigError("width and depth must be positive")
        if self.ridge_z < self.eave_z:
            raise ConfigError("ridge_z below eave_z")


@dataclass
class GroundTruth:
    """Exact geometry the sampler drew from."""

    footprint: Polygon2
    roof_faces: list            # planar 3D rings, plan-projected disjoint
    roof_planes: list
    ground_z: float
    expected_faces: int | None = None
    meta: dict = field(default_factory=dict)


def _rect(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def _lift(ring2, plane: Plane):
    r = np.asarray(ring2, dtype=float)
    return np.column_stack([r, plane.z_at(r[:, 0], r[:, 1])])


def _plane_through(p0, p1, p2):
    n = np.cross(np.asarray(p1) - p0, np.asarray(p2) - p0)
    return Plane.from_normal_point(n, p0)


def archetype_truth(spec: SynthSpec) -> GroundTruth:
    """Roof facets, footprint and expected model complexity."""
    x0, y0 = spec.origin
    x1, y1 = x0 + spec.width, y0 + spec.depth
    flat_eave = Plane.from_normal_point([0, 0, 1], [0, 0, spec.eave_z])
    flat_ridge = Plane.from_normal_point([0, 0, 1], [0, 0, spec.ridge_z])

    if spec.archetype == "flat":
        fp = Polygon2.create(_rect(x0, y0, x1, y1))
        face = _lift(fp.outer, flat_eave)
        return GroundTruth(fp, [face], [flat_eave], spec.ground_z, expected_faces=6)

    if spec.archetype == "gable":
        ym = (y0 + y1) / 2.0
        fp = Polygon2.create(_rect(x0, y0, x1, y1))
        south = _plane_through([x0, y0, spec.eave_z], [x1, y0, spec.eave_z], [x0, ym, spec.ridge_z])
        north = _plane_through([x0, y1, spec.eave_z], [x1, y1, spec.eave_z], [x0, ym, spec.ridge_z])
        faces = [_lift(_rect(x0, y0, x1, ym), south), _lift(_rect(x0, ym, x1, y1), north)]
        return GroundTruth(
            fp, faces, [south, north], spec.ground_z,
            expected_faces=7, meta={"ridge_y": ym},
        )

    if spec.archetype == "hip":
        if spec.width <= spec.depth:
            raise ConfigError("hip roof needs width > depth")
        ym = (y0 + y1) / 2.0
        rx0, rx1 = x0 + spec.depth / 2.0, x1 - spec.depth / 2.0
        south = _plane_through([x0, y0, spec.eave_z], [x1, y0, spec.eave_z], [rx0, ym, spec.ridge_z])
        north = _plane_through([x0, y1, spec.eave_z], [x1, y1, spec.eave_z], [rx0, ym, spec.ridge_z])
        west = _plane_through([x0, y0, spec.eave_z], [x0, y1, spec.eave_z], [rx0, ym, spec.ridge_z])
        east = _plane_through([x1, y0, spec.eave_z], [x1, y1, spec.eave_z], [rx1, ym, spec.ridge_z])
        fp = Polygon2.create(_rect(x0, y0, x1, y1))
        rings2 = [
            np.array([[x0, y0], [x1, y0], [rx1, ym], [rx0, ym]]),
            np.array([[x1, y1], [x0, y1], [rx0, ym], [rx1, ym]]),
            np.array([[x0, y0], [rx0, ym], [x0, y1]]),
            np.array([[x1, y0], [x1, y1], [rx1, ym]]),
        ]
        faces = [_lift(r, p) for r, p in zip(rings2, (south, north, west, east))]
        return GroundTruth(
            fp, faces, [south, north, west, east], spec.ground_z,
            expected_faces=9, meta={"ridge": ((rx0, ym), (rx1, ym))},
        )

    if spec.archetype == "lshape":
        wx, wy = x0 + 0.5 * spec.width, y0 + 0.5 * spec.depth
        ring = np.array(
            [[x0, y0], [x1, y0], [x1, wy], [wx, wy], [wx, y1], [x0, y1]], dtype=float
        )
        fp = Polygon2.create(ring)
        return GroundTruth(
            fp, [_lift(ring, flat_eave)], [flat_eave], spec.ground_z, expected_faces=8
        )

    if spec.archetype == "twotier":
        xm = (x0 + x1) / 2.0
        fp = Polygon2.create(_rect(x0, y0, x1, y1))
        faces = [
            _lift(_rect(x0, y0, xm, y1), flat_eave),
            _lift(_rect(xm, y0, x1, y1), flat_ridge),
        ]
        return GroundTruth(
            fp, faces, [flat_eave, flat_ridge], spec.ground_z,
            expected_faces=10, meta={"step_x": xm},
        )

    # overhang: high slab whose edge juts past the lower wing's wall line
    lip = 0.05 * spec.width
    edge = x0 + 0.65 * spec.width
    lower_from = edge - lip
    fp = Polygon2.create(_rect(x0, y0, x1, y1))
    faces = [
        _lift(_rect(x0, y0, edge, y1), flat_ridge),
        _lift(_rect(lower_from, y0, x1, y1), flat_eave),
    ]
    return GroundTruth(
        fp, faces, [flat_ridge, flat_eave], spec.ground_z,
        expected_faces=10, meta={"slab_edge_x": edge, "occluded_from": lower_from},
    )


def _sample_ring_plan(ring2, plane: Plane, density, rng):
    """Uniform plan-density sampling of a facet given as a 2D ring."""
    from .geom import ring_area, triangulate_ring

    r = np.asarray(ring2, dtype=float)
    area = abs(ring_area(r))
    n = max(3, int(round(density * area)))
    tris = triangulate_ring(r)
    tri_pts = np.array([[r[a], r[b], r[c]] for a, b, c in tris])
    areas = np.abs(
        0.5
        * (
            (tri_pts[:, 1, 0] - tri_pts[:, 0, 0]) * (tri_pts[:, 2, 1] - tri_pts[:, 0, 1])
            - (tri_pts[:, 1, 1] - tri_pts[:, 0, 1]) * (tri_pts[:, 2, 0] - tri_pts[:, 0, 0])
        )
    )
    weights = areas / areas.sum()
    pick = rng.choice(len(tris), size=n, p=weights)
    u = rng.uniform(size=n)
    v = rng.uniform(size=n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    chosen = tri_pts[pick]
    xy = (
        chosen[:, 0]
        + u[:, None] * (chosen[:, 1] - chosen[:, 0])
        + v[:, None] * (chosen[:, 2] - chosen[:, 0])
    )
    z = plane.z_at(xy[:, 0], xy[:, 1])
    return np.column_stack([xy, z])


def sample_building(spec: SynthSpec, rng) -> tuple:
    """Draw points for one building.

    Returns ``(xyz, segment_labels, truth)`` where segment labels index
    into ``truth.roof_planes`` and -1 marks outliers / terrain points.
    """
    truth = archetype_truth(spec)
    chunks, labels = [], []
    for si, (face, plane) in enumerate(zip(truth.roof_faces, truth.roof_planes)):
        pts = _sample_ring_plan(face[:, :2], plane, spec.density, rng)
        if spec.noise > 0:
            pts = pts + rng.normal(scale=spec.noise, size=len(pts))[:, None] * plane.normal
        chunks.append(pts)
        labels.append(np.full(len(pts), si, dtype=np.int32))

    if spec.ground_ring:
        w = spec.ground_ring_width
        bx0, by0, bx1, by1 = truth.footprint.bounds()
        outer_area = (bx1 - bx0 + 2 * w) * (by1 - by0 + 2 * w)
        n = max(50, int(round(spec.density * 0.25 * (outer_area - truth.footprint.area))))
        got = []
        while len(got) < n:
            cand = np.column_stack(
                [
                    rng.uniform(bx0 - w, bx1 + w, size=4 * n),
                    rng.uniform(by0 - w, by1 + w, size=4 * n),
                ]
            )
            from .geom import points_in_polygon

            keep = cand[points_in_polygon(cand, truth.footprint) == 0]
            got.extend(keep[: n - len(got)])
        ring = np.asarray(got[:n])
        z = np.full(len(ring), spec.ground_z)
        if spec.noise > 0:
            z = z + rng.normal(scale=spec.noise, size=len(ring))
        chunks.append(np.column_stack([ring, z]))
        labels.append(np.full(len(ring), -1, dtype=np.int32))

    if spec.outlier_fraction > 0:
        n_surface = sum(len(c) for c in chunks)
        n_out = int(round(spec.outlier_fraction * n_surface))
        if n_out:
            bx0, by0, bx1, by1 = truth.footprint.bounds()
            zmax = max(float(f[:, 2].max()) for f in truth.roof_faces)
            out = np.column_stack(
                [
                    rng.uniform(bx0, bx1, n_out),
                    rng.uniform(by0, by1, n_out),
                    rng.uniform(spec.ground_z, zmax + 2.0, n_out),
                ]
            )
            chunks.append(out)
            labels.append(np.full(n_out, -1, dtype=np.int32))

    return np.vstack(chunks), np.concatenate(labels), truth


def build_scene(specs, seed=0) -> tuple:
    """Assemble a multi-building scene.

    Returns ``(cloud, footprints, truths)``; the cloud's labels give the
    building index for roof points and -1 for terrain and outliers.
    """
    rng = np.random.default_rng(seed)
    all_xyz, all_labels, footprints, truths = [], [], [], []
    for bi, spec in enumerate(specs):
        xyz, seg, truth = sample_building(spec, rng)
        inst = np.where(seg >= 0, bi, -1).astype(np.int32)
        all_xyz.append(xyz)
        all_labels.append(inst)
        footprints.append(Footprint(str(bi), truth.footprint))
        truths.append(truth)
    cloud = PointCloud(np.vstack(all_xyz), labels=np.concatenate(all_labels))
    return cloud, footprints, truths


def fitted_truth_planes(xyz, seg_labels) -> list:
    """Refit planes from labeled samples; handy for oracle comparisons."""
    planes = []
    for si in range(int(seg_labels.max()) + 1):
        planes.append(fit_plane(xyz[seg_labels == si]))
    return planes
