import numpy as np
import pytest

from urbanrecon.candidates import build_candidates
from urbanrecon.geom import Plane, Polygon2
from urbanrecon.planes import PlanarSegment
from urbanrecon.walltrace import extrude


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# ---------------------------------------------------------------------------
# shared small-building candidate sets; each returns (candidate_set,
# points, ids of the geometrically true faces)


def _seg(plane):
    return PlanarSegment(indices=np.arange(1), plane=plane)


def flat_box_candidates():
    poly = Polygon2.create([(0, 0), (10, 0), (10, 8), (0, 8)])
    walls = extrude([], 0.0, footprint=poly)
    plane = Plane.from_normal_point((0.0, 0.0, 1.0), (0.0, 0.0, 5.0))
    pts = np.column_stack(
        [
            np.repeat(np.linspace(0.5, 9.5, 10), 8),
            np.tile(np.linspace(0.5, 7.5, 8), 10),
            np.full(80, 5.0),
        ]
    )
    cs = build_candidates([_seg(plane)], walls, pts, dist_tol=0.3)
    return cs, pts, list(range(len(cs.faces)))


def gable_candidates():
    poly = Polygon2.create([(0, 0), (10, 0), (10, 8), (0, 8)])
    walls = extrude([], 0.0, footprint=poly)
    south = Plane.from_normal_point((0, -0.5, 1), (0, 0, 5))
    north = Plane.from_normal_point((0, 0.5, 1), (0, 8, 5))
    xs = np.repeat(np.linspace(0.25, 9.75, 20), 16)
    ys = np.tile(np.linspace(0.25, 7.75, 16), 20)
    zs = np.where(ys < 4, 5 + 0.5 * ys, 9 - 0.5 * ys)
    pts = np.column_stack([xs, ys, zs])
    cs = build_candidates([_seg(south), _seg(north)], walls, pts, dist_tol=0.3)

    def envelope(x, y):
        return min(float(south.z_at(x, y)), float(north.z_at(x, y)))

    real = []
    for i, f in enumerate(cs.faces):
        if f.kind == "ground":
            real.append(i)
        elif f.kind == "roof":
            cx, cy = np.mean(f.ring2d, axis=0)
            if abs(float(f.plane.z_at(cx, cy)) - envelope(cx, cy)) < 1e-6:
                real.append(i)
        else:
            o, u = f.axis
            x, y = o + float(np.mean(f.ring2d[:, 0])) * u
            if f.centroid_z < envelope(x, y) - 1e-6:
                real.append(i)
    return cs, pts, real


def twotier_candidates():
    poly = Polygon2.create([(0, 0), (12, 0), (12, 8), (0, 8)])
    walls = extrude([np.array([[6.0, 0.0], [6.0, 8.0]])], 0.0, footprint=poly)
    lower = Plane.from_normal_point((0.0, 0.0, 1.0), (0.0, 0.0, 4.0))
    upper = Plane.from_normal_point((0.0, 0.0, 1.0), (0.0, 0.0, 7.0))
    xs = np.repeat(np.linspace(0.25, 11.75, 24), 16)
    ys = np.tile(np.linspace(0.25, 7.75, 16), 24)
    zs = np.where(xs < 6, 4.0, 7.0)
    pts = np.column_stack([xs, ys, zs])
    cs = build_candidates([_seg(lower), _seg(upper)], walls, pts, dist_tol=0.3)

    def roof_z(x):
        return 4.0 if x < 6 else 7.0

    real = []
    for i, f in enumerate(cs.faces):
        if f.kind == "ground":
            real.append(i)
        elif f.kind == "roof":
            cx = float(np.mean(f.ring2d[:, 0]))
            if abs(float(f.plane.z_at(cx, 0.0)) - roof_z(cx)) < 1e-6:
                real.append(i)
        else:
            o, u = f.axis
            x, y = o + float(np.mean(f.ring2d[:, 0])) * u
            if abs(x - 6.0) < 1e-6:
                if 4.0 + 1e-6 < f.centroid_z < 7.0 - 1e-6:
                    real.append(i)
            elif f.centroid_z < roof_z(x) - 1e-6:
                real.append(i)
    return cs, pts, real
