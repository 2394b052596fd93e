"""Candidate face generation for the surface-selection program.

Every detected roof plane is extended over the whole building boundary
and cut by the other roof planes and by interior wall lines.  Because
all planes see the same cut lines, their 2D cell decompositions agree,
and the faces over one cell form a vertical stack from which exactly
one roof must be chosen.  Vertical wall strips along traced wall lines
and the ground polygon complete the hypothesis set; a binary program
later picks the subset that closes into a manifold surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometry, NoRoofPlanes
from .geom import (
    MIN_FACE_AREA,
    ON_TOL,
    SNAP_TOL,
    Plane,
    Polygon2,
    VertexPool,
    ensure_ccw,
    line_intersection_2d,
    point_in_polygon,
    ring_area,
    ring_centroid,
    seg_points_distance,
    split_ring_by_line,
)
from .walltrace import WallSet


@dataclass
class CandidateFace:
    """One planar polygon that may appear in the final surface."""

    ring3d: np.ndarray
    plane: Plane
    kind: str  # 'roof' | 'wall' | 'ground'
    plane_key: tuple
    ring2d: np.ndarray
    axis: tuple | None = None  # (origin2, dir2) for wall faces
    segment: int | None = None
    cell: int | None = None
    area: float = 0.0
    centroid_z: float = 0.0
    support: int = 0


@dataclass
class CandidateSet:
    """Hypothesis faces plus the combinatorial structure linking them.

    ``edges`` maps welded vertex-id pairs to the faces bordering them;
    ``groups`` are vertical roof stacks (exactly one member is real);
    ``forced`` faces are always part of the surface (the ground).
    """

    faces: list
    vertices: np.ndarray
    rings: list
    edges: dict
    groups: list
    forced: list
    priors: list
    n_points: int
    z_lo: float
    z_hi: float

    def roof_coefficients(self) -> np.ndarray:
        """Per-face height preference in [0, 1]; 0 for the highest face.

        Only roof faces are charged: walls follow from whichever roofs
        are chosen, and taxing their height would work against picking
        a higher roof layer.
        """
        span = self.z_hi - self.z_lo
        coeff = np.zeros(len(self.faces))
        if span < 1e-9:
            return coeff
        for i, f in enumerate(self.faces):
            if f.kind == "roof":
                coeff[i] = (self.z_hi - f.centroid_z) / span
        return coeff


# ---------------------------------------------------------------------------
# cut-line construction


def roof_pair_lines(planes) -> list:
    """2D lines where pairs of non-vertical planes meet, as (normal, c).

    The planes ``z = a x + b y + c`` intersect over the plan line
    ``(a1-a2) x + (b1-b2) y + (c1-c2) = 0``; parallel pairs are skipped.
    """
    coef = []
    for p in planes:
        nx, ny, nz = p.normal
        coef.append((-nx / nz, -ny / nz, -p.d / nz))
    lines = []
    for i in range(len(planes)):
        for j in range(i + 1, len(planes)):
            da = coef[i][0] - coef[j][0]
            db = coef[i][1] - coef[j][1]
            dc = coef[i][2] - coef[j][2]
            norm = float(np.hypot(da, db))
            if norm < 1e-9:
                continue
            lines.append((np.array([da, db]) / norm, dc / norm))
    return lines


def arrangement_cells(poly: Polygon2, lines, min_area=MIN_FACE_AREA) -> list:
    """Split the boundary polygon by every line; returns CCW cell rings."""
    cells = [ensure_ccw(poly.outer)]
    for n, c in lines:
        nxt = []
        for cell in cells:
            neg, pos = split_ring_by_line(cell, n, c)
            nxt.extend(neg)
            nxt.extend(pos)
        cells = nxt
    cells = [c for c in cells if abs(ring_area(c)) >= min_area]
    cells.sort(key=lambda r: (round(ring_centroid(r)[0], 9), round(ring_centroid(r)[1], 9)))
    return cells


def chord_intervals(origin, direction, poly: Polygon2) -> list:
    """Parameter intervals where the line ``origin + t dir`` is inside."""
    o = np.asarray(origin, dtype=float)
    u = np.asarray(direction, dtype=float)
    n = np.array([-u[1], u[0]])
    c = -float(n @ o)
    ts = []
    for a, b in poly.edges():
        da = float(n @ a) + c
        db = float(n @ b) + c
        if abs(da) <= ON_TOL and abs(db) <= ON_TOL:
            ts.append(float((a - o) @ u))
            ts.append(float((b - o) @ u))
            continue
        if (da > ON_TOL and db > ON_TOL) or (da < -ON_TOL and db < -ON_TOL):
            continue
        s = da / (da - db)
        p = a + s * (b - a)
        ts.append(float((p - o) @ u))
    if not ts:
        return []
    ts.sort()
    uniq = [ts[0]]
    for t in ts[1:]:
        if t - uniq[-1] > 1e-9:
            uniq.append(t)
    out = []
    for t0, t1 in zip(uniq[:-1], uniq[1:]):
        if t1 - t0 < 1e-6:
            continue
        mid = o + 0.5 * (t0 + t1) * u
        if point_in_polygon(mid, poly) == "inside":
            if out and t0 - out[-1][1] <= 1e-9:
                out[-1] = (out[-1][0], t1)
            else:
                out.append((t0, t1))
    return out


# ---------------------------------------------------------------------------
# wall strips


def _strip_cells(line, interval, roof_planes, cross_ts, z_ground, top_margin):
    """Cells of one wall strip in (t, z) coordinates.

    The strip rectangle is cut by every roof plane's height function
    (linear in t) and by vertical lines at wall-wall crossings.  Cells
    whose centroid lies above every roof plane can never be part of a
    closed surface and are dropped here.
    """
    t0, t1 = interval
    o, u = line.origin, line.direction
    ends = np.array([o + t0 * u, o + t1 * u])
    z_top = z_ground
    for p in roof_planes:
        z_top = max(z_top, float(np.max(p.z_at(ends[:, 0], ends[:, 1]))))
    z_top += top_margin
    rect = np.array([[t0, z_ground], [t1, z_ground], [t1, z_top], [t0, z_top]])
    cells = [rect]
    slopes = []
    for p in roof_planes:
        za = float(p.z_at(*ends[0]))
        zb = float(p.z_at(*ends[1]))
        m = (zb - za) / (t1 - t0)
        q = za - m * t0
        slopes.append((m, q))
        nxt = []
        for cell in cells:
            neg, pos = split_ring_by_line(cell, np.array([-m, 1.0]), -q)
            nxt.extend(neg)
            nxt.extend(pos)
        cells = nxt
    for tc in sorted(cross_ts):
        if tc <= t0 + 1e-9 or tc >= t1 - 1e-9:
            continue
        nxt = []
        for cell in cells:
            neg, pos = split_ring_by_line(cell, np.array([1.0, 0.0]), -tc)
            nxt.extend(neg)
            nxt.extend(pos)
        cells = nxt
    kept = []
    for cell in cells:
        if abs(ring_area(cell)) < MIN_FACE_AREA:
            continue
        ct, cz = ring_centroid(cell)
        roof_z = max(m * ct + q for m, q in slopes)
        if cz > roof_z + 1e-9:
            continue  # floats above every roof plane
        kept.append(ensure_ccw(cell))
    kept.sort(key=lambda r: (round(ring_centroid(r)[0], 9), round(ring_centroid(r)[1], 9)))
    return kept


# ---------------------------------------------------------------------------
# welding and edge extraction


def _fragment(rings3d, snap=SNAP_TOL):
    """Weld ring vertices and split edges at vertices lying on them.

    Faces generated independently share geometry only approximately;
    pooling vertices and inserting on-segment vertices gives every
    coincident boundary piece one canonical (vid, vid) edge key, which
    the selection constraints rely on.
    """
    pool = VertexPool(snap)
    raw = []
    for ring in rings3d:
        ids = [pool.add(v) for v in ring]
        dedup = []
        for v in ids:
            if not dedup or v != dedup[-1]:
                dedup.append(v)
        if len(dedup) > 1 and dedup[0] == dedup[-1]:
            dedup.pop()
        raw.append(dedup)
    pts = pool.array()
    rings = []
    for ids in raw:
        if len(ids) < 3:
            rings.append(None)
            continue
        out = []
        for k in range(len(ids)):
            i, j = ids[k], ids[(k + 1) % len(ids)]
            a, b = pts[i], pts[j]
            seg = b - a
            length = float(np.linalg.norm(seg))
            out.append(i)
            if length <= 2 * snap:
                continue
            d = seg_points_distance(pts, a, b)
            near = np.flatnonzero(d <= snap)
            if len(near) <= 2:
                continue
            tvals = (pts[near] - a) @ (seg / length)
            order = np.argsort(tvals)
            for idx in order:
                v = int(near[idx])
                t = float(tvals[idx])
                if v == i or v == j or t <= snap or t >= length - snap:
                    continue
                if out[-1] != v:
                    out.append(v)
        dedup = []
        for v in out:
            if not dedup or v != dedup[-1]:
                dedup.append(v)
        if len(dedup) > 1 and dedup[0] == dedup[-1]:
            dedup.pop()
        rings.append(dedup if len(dedup) >= 3 else None)
    return pool, rings


def _edge_table(rings):
    edges = {}
    for fid, ring in enumerate(rings):
        for k in range(len(ring)):
            i, j = ring[k], ring[(k + 1) % len(ring)]
            key = (i, j) if i < j else (j, i)
            edges.setdefault(key, []).append(fid)
    return edges


# ---------------------------------------------------------------------------
# point support


def _points_in_ring(pts, ring) -> np.ndarray:
    """Vectorized even-odd test of many 2D points against one ring."""
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for k in range(len(ring)):
        cond = (y[k] > py) != (yn[k] > py)
        if not cond.any():
            continue
        t = (py - y[k]) / (yn[k] - y[k])
        xc = x[k] + t * (xn[k] - x[k])
        inside ^= cond & (px < xc)
    return inside


def compute_support(faces, xyz, normals, dist_tol, angle_tol_deg=20.0):
    """Assign every point to the nearest candidate face it fits.

    A point fits a face when it is within ``dist_tol`` of the plane,
    its projection lands inside the face polygon and (when normals are
    given) its normal agrees with the face within ``angle_tol_deg``,
    orientation ignored.  Exclusive nearest assignment keeps the summed
    support of any face subset at or below the point count.
    """
    pts = np.asarray(xyz, dtype=float)
    n = len(pts)
    best_d = np.full(n, np.inf)
    best_f = np.full(n, -1, dtype=np.int64)
    cos_min = float(np.cos(np.radians(angle_tol_deg)))
    for fid, face in enumerate(faces):
        d = np.abs(face.plane.signed_distance(pts))
        cand = d < dist_tol
        if normals is not None:
            cand &= np.abs(np.asarray(normals) @ face.plane.normal) >= cos_min
        cand &= d < best_d
        if not cand.any():
            continue
        idx = np.flatnonzero(cand)
        if face.axis is None:
            p2 = pts[idx, :2]
        else:
            o, u = face.axis
            t = (pts[idx, :2] - o) @ u
            p2 = np.column_stack([t, pts[idx, 2]])
        hit = idx[_points_in_ring(p2, face.ring2d)]
        best_d[hit] = d[hit]
        best_f[hit] = fid
    counts = np.bincount(best_f[best_f >= 0], minlength=len(faces))
    for fid, face in enumerate(faces):
        face.support = int(counts[fid])
    return counts


# ---------------------------------------------------------------------------
# assembly


def build_candidates(
    roof_segments,
    walls: WallSet,
    xyz,
    normals=None,
    *,
    dist_tol,
    angle_tol_deg=20.0,
    min_cell_area=MIN_FACE_AREA,
    top_margin=1.0,
    snap=SNAP_TOL,
) -> CandidateSet:
    """Build the full hypothesis set for one building.

    ``roof_segments`` are the non-vertical planar segments of the
    building cloud; ``walls`` carries the boundary polygon and all
    traced wall lines; ``xyz`` are the building points used for support
    counting and the height range of the roof preference term.
    """
    poly = walls.outer_loop
    if poly.holes:
        raise InvalidGeometry("boundary polygons with holes are not supported")
    segs = [s for s in roof_segments if not s.vertical and not s.plane.is_vertical(1e-6)]
    if not segs:
        raise NoRoofPlanes("no non-vertical planes to roof the building")
    # duplicate detections of one plane would double every stack
    unique = {}
    for s in segs:
        unique.setdefault(s.plane.key(), s.plane)
    planes = [unique[k] for k in sorted(unique)]

    inner = [ln for ln in walls.lines if not ln.outer]
    cut_lines = roof_pair_lines(planes)
    for ln in inner:
        n2 = ln.plane.normal[:2]
        norm = float(np.linalg.norm(n2))
        cut_lines.append((n2 / norm, ln.plane.d / norm))
    cells = arrangement_cells(poly, cut_lines, min_cell_area)
    if not cells:
        raise InvalidGeometry("boundary polygon vanished under arrangement cuts")

    faces = []
    stacks = []  # face ids per cell, parallel to `cells`
    for cid, cell in enumerate(cells):
        stack = []
        c2 = ring_centroid(cell)
        for sid, plane in enumerate(planes):
            z = plane.z_at(cell[:, 0], cell[:, 1])
            ring3d = np.column_stack([cell, z])
            area = abs(ring_area(cell)) / abs(plane.normal[2])
            stack.append(len(faces))
            faces.append(
                CandidateFace(
                    ring3d=ring3d,
                    plane=plane,
                    kind="roof",
                    plane_key=plane.key(),
                    ring2d=cell,
                    segment=sid,
                    cell=cid,
                    area=area,
                    centroid_z=float(plane.z_at(*c2)),
                )
            )
        stacks.append(stack)

    # wall strips along every traced line, cut by roofs and crossings
    for li, line in enumerate(walls.lines):
        if line.outer:
            intervals = [tuple(iv) for iv in line.intervals]
        else:
            intervals = chord_intervals(line.origin, line.direction, poly)
        if not intervals:
            continue
        n_a = line.plane.normal[:2]
        cross_ts = []
        for lj, other in enumerate(walls.lines):
            if lj == li:
                continue
            pt = line_intersection_2d(
                n_a, line.plane.d, other.plane.normal[:2], other.plane.d
            )
            if pt is None:
                continue
            cross_ts.append(float((pt - line.origin) @ line.direction))
        for interval in intervals:
            for cell in _strip_cells(
                line, interval, planes, cross_ts, walls.z_ground, top_margin
            ):
                t, z = cell[:, 0], cell[:, 1]
                p2 = line.origin[None, :] + t[:, None] * line.direction[None, :]
                ring3d = np.column_stack([p2, z])
                faces.append(
                    CandidateFace(
                        ring3d=ring3d,
                        plane=line.plane,
                        kind="wall",
                        plane_key=line.plane.key(),
                        ring2d=cell,
                        axis=(line.origin.copy(), line.direction.copy()),
                        area=abs(ring_area(cell)),
                        centroid_z=float(ring_centroid(cell)[1]),
                    )
                )

    ground_ring = ensure_ccw(poly.outer)
    ground_plane = Plane(np.array([0.0, 0.0, 1.0]), -walls.z_ground).canonical()
    faces.append(
        CandidateFace(
            ring3d=np.column_stack(
                [ground_ring, np.full(len(ground_ring), walls.z_ground)]
            ),
            plane=ground_plane,
            kind="ground",
            plane_key=ground_plane.key(),
            ring2d=ground_ring,
            area=abs(ring_area(ground_ring)),
            centroid_z=walls.z_ground,
        )
    )

    pool, rings = _fragment([f.ring3d for f in faces], snap)
    keep = [i for i, r in enumerate(rings) if r is not None]
    remap = {old: new for new, old in enumerate(keep)}
    faces = [faces[i] for i in keep]
    rings = [rings[i] for i in keep]
    groups = []
    for stack in stacks:
        ids = tuple(remap[f] for f in stack if f in remap)
        if ids:
            groups.append(ids)

    pts = np.asarray(xyz, dtype=float)
    compute_support(faces, pts, normals, dist_tol, angle_tol_deg)

    priors = []
    for sid in range(len(planes)):
        own = [
            (f.support, f.area, -fid)
            for fid, f in enumerate(faces)
            if f.kind == "roof" and f.segment == sid
        ]
        if own:
            best = max(own)
            if best[0] > 0:  # an unsupported plane earns no pinned face
                priors.append(-best[2])
    forced = [fid for fid, f in enumerate(faces) if f.kind == "ground"]

    zc = [f.centroid_z for f in faces]
    return CandidateSet(
        faces=faces,
        vertices=pool.array(),
        rings=rings,
        edges=_edge_table(rings),
        groups=groups,
        forced=forced,
        priors=priors,
        n_points=len(pts),
        z_lo=float(min(zc)),
        z_hi=float(max(zc)),
    )
