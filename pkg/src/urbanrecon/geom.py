"""Geometric primitives shared by the whole pipeline.

All coordinates are metric (meters). Predicates run in double precision
with a global snap tolerance: constructed vertices closer than ``SNAP_TOL``
are merged, which keeps plane arrangements consistent at building scale
without an exact-arithmetic kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, InvalidGeometry, NonManifoldResult

SNAP_TOL = 1e-6        # vertex merge distance, meters
ON_TOL = 1e-9          # on-plane / on-line classification, meters
MIN_FACE_AREA = 1e-4   # polygons below this are slivers and get discarded


# ---------------------------------------------------------------------------
# planes


@dataclass(frozen=True)
class Plane:
    """Oriented plane ``n . p + d = 0`` with unit normal.

    Canonical orientation: the largest-magnitude normal component is
    positive (ties resolved by the lowest axis index), so two fits of the
    same geometric plane compare equal.
    """

    normal: np.ndarray
    d: float

    @staticmethod
    def from_normal_point(normal, point) -> "Plane":
        n = np.asarray(normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn < ON_TOL:
            raise DegenerateInput("zero-length plane normal")
        n = n / nn
        d = -float(np.dot(n, np.asarray(point, dtype=float)))
        return Plane(n, d).canonical()

    def canonical(self) -> "Plane":
        n = np.asarray(self.normal, dtype=float)
        mx = np.max(np.abs(n))
        pivot = int(np.flatnonzero(np.abs(n) >= mx - 1e-12)[0])
        if n[pivot] < 0:
            return Plane(-n, -self.d)
        return Plane(n.copy(), float(self.d))

    def signed_distance(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.normal + self.d

    def z_at(self, x, y) -> np.ndarray:
        """Height of the plane over ground coordinates; requires n_z != 0."""
        nz = self.normal[2]
        if abs(nz) < ON_TOL:
            raise DegenerateInput("vertical plane has no height function")
        return -(self.d + self.normal[0] * np.asarray(x) + self.normal[1] * np.asarray(y)) / nz

    def is_vertical(self, tol=ON_TOL) -> bool:
        return abs(self.normal[2]) <= tol

    def key(self, normal_decimals=7, offset_decimals=6) -> tuple:
        """Quantized identity for deduplication of canonical planes."""
        c = self.canonical()
        return (
            round(float(c.normal[0]), normal_decimals),
            round(float(c.normal[1]), normal_decimals),
            round(float(c.normal[2]), normal_decimals),
            round(float(c.d), offset_decimals),
        )


def fit_plane(points) -> Plane:
    """Least-squares plane through ``points`` (orthogonal distance).

    Raises DegenerateInput when the points are coincident or collinear
    within 1e-9.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise DegenerateInput("need at least 3 points to fit a plane")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[1] <= 1e-9 * max(1.0, s[0]):
        raise DegenerateInput("points are collinear or coincident")
    return Plane.from_normal_point(vt[2], centroid)


def intersect_three_planes(a: Plane, b: Plane, c: Plane):
    """Common point of three planes, or None when the normals are
    linearly dependent (|det| <= 1e-9)."""
    m = np.vstack([a.normal, b.normal, c.normal])
    if abs(np.linalg.det(m)) <= 1e-9:
        return None
    return np.linalg.solve(m, -np.array([a.d, b.d, c.d]))


# ---------------------------------------------------------------------------
# 2D ring utilities


def ring_area(ring) -> float:
    """Signed shoelace area; positive for counter-clockwise rings."""
    r = np.asarray(ring, dtype=float)
    x, y = r[:, 0], r[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ring_centroid(ring) -> np.ndarray:
    r = np.asarray(ring, dtype=float)
    x, y = r[:, 0], r[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        return r.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def ensure_ccw(ring) -> np.ndarray:
    r = np.asarray(ring, dtype=float)
    return r if ring_area(r) >= 0 else r[::-1].copy()


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > ON_TOL:
            return 1
        if v < -ON_TOL:
            return -1
        return 0

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def ring_is_simple(ring) -> bool:
    """True when no two non-adjacent edges properly cross. O(n^2)."""
    r = np.asarray(ring, dtype=float)
    n = len(r)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = r[i], r[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(a1, a2, r[j], r[(j + 1) % n]):
                return False
    return True


def seg_point_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-30:
        return float(np.linalg.norm(p - a))
    t = float(np.clip(np.dot(p - a, ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def seg_points_distance(points, a, b) -> np.ndarray:
    """Distances from many points to segment a-b (vectorized)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-30:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(pts - closest, axis=1)


def line_intersection_2d(n1, c1, n2, c2):
    """Point satisfying both ``n.p + c = 0`` lines, or None if parallel."""
    det = n1[0] * n2[1] - n1[1] * n2[0]
    if abs(det) < 1e-12:
        return None
    x = (-c1 * n2[1] + c2 * n1[1]) / det
    y = (-c2 * n1[0] + c1 * n2[0]) / det
    return np.array([x, y])


# ---------------------------------------------------------------------------
# polygons with holes (footprints)


@dataclass(frozen=True)
class Polygon2:
    """Simple polygon in the ground plane: CCW outer ring, CW holes."""

    outer: np.ndarray
    holes: tuple = ()

    @staticmethod
    def create(outer, holes=()) -> "Polygon2":
        """Validate and normalize ring orientations."""
        out = np.asarray(outer, dtype=float)
        if len(out) >= 2 and np.allclose(out[0], out[-1]):
            out = out[:-1]
        if len(out) < 3:
            raise InvalidGeometry("outer ring needs at least 3 vertices")
        if not ring_is_simple(out):
            raise InvalidGeometry("outer ring is self-intersecting")
        if abs(ring_area(out)) < 1e-12:
            raise InvalidGeometry("outer ring has zero area")
        out = ensure_ccw(out)
        fixed_holes = []
        for h in holes:
            hh = np.asarray(h, dtype=float)
            if len(hh) >= 2 and np.allclose(hh[0], hh[-1]):
                hh = hh[:-1]
            if len(hh) < 3 or not ring_is_simple(hh):
                raise InvalidGeometry("hole ring invalid")
            hh = ensure_ccw(hh)[::-1].copy()  # holes run clockwise
            fixed_holes.append(hh)
        return Polygon2(out, tuple(fixed_holes))

    @property
    def area(self) -> float:
        return ring_area(self.outer) + sum(ring_area(h) for h in self.holes)

    def bounds(self):
        mn = self.outer.min(axis=0)
        mx = self.outer.max(axis=0)
        return mn[0], mn[1], mx[0], mx[1]

    def edges(self):
        rings = [self.outer, *self.holes]
        for r in rings:
            for i in range(len(r)):
                yield r[i], r[(i + 1) % len(r)]


def point_in_polygon(point, poly: Polygon2, tol=ON_TOL) -> str:
    """Even-odd classification: 'inside', 'boundary' or 'outside'."""
    p = np.asarray(point, dtype=float)
    for a, b in poly.edges():
        if seg_point_distance(p, a, b) <= tol:
            return "boundary"
    crossings = 0
    for ring in (poly.outer, *poly.holes):
        x, y = ring[:, 0], ring[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cond = (y > p[1]) != (yn > p[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x + (p[1] - y) / (yn - y) * (xn - x)
        crossings += int(np.count_nonzero(cond & (xint > p[0])))
    return "inside" if crossings % 2 == 1 else "outside"


def points_in_polygon(points, poly: Polygon2, tol=ON_TOL) -> np.ndarray:
    """Vectorized membership for many points: 0=outside, 1=inside, 2=boundary."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    crossings = np.zeros(n, dtype=np.int64)
    on_boundary = np.zeros(n, dtype=bool)
    for ring in (poly.outer, *poly.holes):
        x, y = ring[:, 0], ring[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        for i in range(len(ring)):
            on_boundary |= seg_points_distance(pts, ring[i], ring[(i + 1) % len(ring)]) <= tol
        py = pts[:, 1][:, None]
        px = pts[:, 0][:, None]
        cond = (y[None, :] > py) != (yn[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x[None, :] + (py - y[None, :]) / (yn[None, :] - y[None, :]) * (xn - x)[None, :]
        crossings += np.count_nonzero(cond & (xint > px), axis=1)
    out = np.where(crossings % 2 == 1, 1, 0).astype(np.int8)
    out[on_boundary] = 2
    return out


# ---------------------------------------------------------------------------
# ring splitting by a line (the workhorse of face hypothesis)


def _side_of(d, tol):
    if d > tol:
        return 1
    if d < -tol:
        return -1
    return 0


def split_ring_by_line(ring, normal, offset, tol=ON_TOL):
    """Split a simple CCW ring by the line ``n . p + c = 0``.

    Returns ``(neg_pieces, pos_pieces)``: lists of CCW rings covering the
    closed negative / positive sides. Vertices on the line are kept once.
    Handles non-convex rings, producing multiple components per side.
    """
    r = np.asarray(ring, dtype=float)
    n = np.asarray(normal, dtype=float)
    nn = float(np.hypot(n[0], n[1]))
    if nn < 1e-15:
        raise DegenerateInput("zero-length line normal")
    n = n / nn
    c = float(offset) / nn
    d = r @ n + c

    if np.all(d <= tol):
        return [r.copy()], []
    if np.all(d >= -tol):
        return [], [r.copy()]

    # augment the ring with crossing vertices
    aug = []
    sides = []
    m = len(r)
    for i in range(m):
        j = (i + 1) % m
        si, sj = _side_of(d[i], tol), _side_of(d[j], tol)
        aug.append(r[i])
        sides.append(si)
        if si * sj < 0:
            t = d[i] / (d[i] - d[j])
            aug.append(r[i] + t * (r[j] - r[i]))
            sides.append(0)
    aug = np.asarray(aug)
    sides = np.asarray(sides)

    direction = np.array([-n[1], n[0]])
    origin = -c * n

    def t_of(p):
        return float(np.dot(p - origin, direction))

    base_poly = Polygon2(ensure_ccw(r))

    def collect(keep):
        k = len(aug)
        start = next(i for i in range(k) if sides[i] == -keep)
        order = [(start + i) % k for i in range(k)]
        chains = []
        cur = []
        has_strict = False
        for idx in order:
            s = sides[idx]
            if s == -keep:
                if cur and has_strict:
                    chains.append(cur)
                cur, has_strict = [], False
            else:
                cur.append(idx)
                if s == keep:
                    has_strict = True
        if cur and has_strict:
            chains.append(cur)
        if not chains:
            return []

        # nodes: chain endpoints on the cut line, merged by parameter t
        events = []
        for ci, ch in enumerate(chains):
            events.append((t_of(aug[ch[0]]), ci, "start"))
            events.append((t_of(aug[ch[-1]]), ci, "end"))
        ts = sorted(e[0] for e in events)
        node_ts = []
        for t in ts:
            if not node_ts or t - node_ts[-1] > tol * 10:
                node_ts.append(t)

        def node_of(t):
            return min(range(len(node_ts)), key=lambda i: abs(node_ts[i] - t))

        chain_nodes = [(node_of(t_of(aug[ch[0]])), node_of(t_of(aug[ch[-1]]))) for ch in chains]

        # bridge intervals: sections of the cut line interior to the ring
        bridges = []
        for i in range(len(node_ts) - 1):
            mid = origin + 0.5 * (node_ts[i] + node_ts[i + 1]) * direction
            if point_in_polygon(mid, base_poly) == "inside":
                bridges.append((i, i + 1))

        # stitch chains and bridges into closed loops
        chain_used = [False] * len(chains)
        bridge_used = [False] * len(bridges)
        chains_at = {}
        for ci, (a, b) in enumerate(chain_nodes):
            chains_at.setdefault(a, []).append(ci)
        bridges_at = {}
        for bi, (a, b) in enumerate(bridges):
            bridges_at.setdefault(a, []).append(bi)
            bridges_at.setdefault(b, []).append(bi)

        pieces = []
        for ci0 in range(len(chains)):
            if chain_used[ci0]:
                continue
            loop_pts = []
            ci = ci0
            guard = 0
            while True:
                guard += 1
                if guard > 4 * (len(chains) + len(bridges) + 1):
                    break
                chain_used[ci] = True
                loop_pts.extend(aug[idx] for idx in chains[ci])
                node = chain_nodes[ci][1]
                # follow bridges (possibly several in a row) to the next chain
                hops = 0
                nxt = None
                while nxt is None:
                    hops += 1
                    if hops > len(bridges) + 2:
                        break
                    cands = [x for x in chains_at.get(node, []) if not chain_used[x]]
                    if node == chain_nodes[ci0][0] and not cands:
                        nxt = -1  # closed
                        break
                    if cands:
                        nxt = cands[0]
                        break
                    bcands = [b for b in bridges_at.get(node, []) if not bridge_used[b]]
                    if not bcands:
                        nxt = -1
                        break
                    bi = bcands[0]
                    bridge_used[bi] = True
                    a, b = bridges[bi]
                    node = b if a == node else a
                    if node == chain_nodes[ci0][0]:
                        cands = [x for x in chains_at.get(node, []) if not chain_used[x]]
                        if not cands:
                            nxt = -1
                            break
                if nxt is None or nxt == -1:
                    break
                ci = nxt
            if len(loop_pts) >= 3:
                piece = np.asarray(loop_pts)
                if abs(ring_area(piece)) > 1e-12:
                    pieces.append(ensure_ccw(dedupe_ring(piece)))
        return pieces

    return collect(-1), collect(1)


def dedupe_ring(ring, tol=SNAP_TOL) -> np.ndarray:
    """Drop consecutive duplicate vertices (cyclically)."""
    r = np.asarray(ring, dtype=float)
    keep = []
    for i in range(len(r)):
        if not keep or np.linalg.norm(r[i] - keep[-1]) > tol:
            keep.append(r[i])
    if len(keep) > 1 and np.linalg.norm(keep[0] - keep[-1]) <= tol:
        keep.pop()
    return np.asarray(keep)


# ---------------------------------------------------------------------------
# planar 3D faces


def face_frame(points):
    """Orthonormal (origin, u, v, normal) frame for a planar 3D ring."""
    pts = np.asarray(points, dtype=float)
    normal = newell_normal(pts)
    nn = np.linalg.norm(normal)
    if nn < 1e-14:
        raise DegenerateInput("degenerate face")
    normal = normal / nn
    u = np.cross(normal, [0.0, 0.0, 1.0])
    if np.linalg.norm(u) < 1e-9:
        u = np.cross(normal, [0.0, 1.0, 0.0])
    u = u / np.linalg.norm(u)
    v = np.cross(normal, u)
    return pts[0], u, v, normal


def newell_normal(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    n = np.zeros(3)
    n[0] = np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2]))
    n[1] = np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0]))
    n[2] = np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1]))
    return n / 2.0


def face_area_3d(points) -> float:
    return float(np.linalg.norm(newell_normal(points)))


def clip_polygon_by_halfplane(face_points, cut: Plane, keep_positive: bool, tol=ON_TOL):
    """Intersect a planar 3D polygon with the closed half-space of ``cut``.

    Returns a list of 3D rings (possibly empty, possibly several
    components for non-convex faces).
    """
    pts = np.asarray(face_points, dtype=float)
    origin, u, v, _ = face_frame(pts)
    local = np.stack([(pts - origin) @ u, (pts - origin) @ v], axis=1)
    a = float(np.dot(cut.normal, u))
    b = float(np.dot(cut.normal, v))
    c = float(np.dot(cut.normal, origin) + cut.d)
    if np.hypot(a, b) < 1e-12:
        side_ok = (c >= -tol) if keep_positive else (c <= tol)
        return [pts.copy()] if side_ok else []
    was_ccw = ring_area(local) >= 0
    ring2 = local if was_ccw else local[::-1]
    neg, pos = split_ring_by_line(ring2, (a, b), c, tol=tol)
    kept = pos if keep_positive else neg
    out = []
    for piece in kept:
        pc = piece if was_ccw else piece[::-1]
        out.append(origin + pc[:, 0:1] * u + pc[:, 1:2] * v)
    return out


def triangulate_ring(ring) -> list:
    """Ear-clipping triangulation of a simple 2D ring; returns index triples."""
    r = ensure_ccw(np.asarray(ring, dtype=float))
    n = len(r)
    if n < 3:
        return []
    idx = list(range(n))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10 * n * n:
        guard += 1
        found = False
        for k in range(len(idx)):
            i0 = idx[(k - 1) % len(idx)]
            i1 = idx[k]
            i2 = idx[(k + 1) % len(idx)]
            a, b, c = r[i0], r[i1], r[i2]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 1e-14:
                continue  # reflex or degenerate tip
            ear = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if _point_in_triangle(r[j], a, b, c):
                    ear = False
                    break
            if ear:
                tris.append((i0, i1, i2))
                idx.pop(k)
                found = True
                break
        if not found:
            # fall back: drop the most convex vertex to stay terminating
            k = max(
                range(len(idx)),
                key=lambda k: (r[idx[k]][0] - r[idx[(k - 1) % len(idx)]][0])
                * (r[idx[(k + 1) % len(idx)]][1] - r[idx[(k - 1) % len(idx)]][1])
                - (r[idx[k]][1] - r[idx[(k - 1) % len(idx)]][1])
                * (r[idx[(k + 1) % len(idx)]][0] - r[idx[(k - 1) % len(idx)]][0]),
            )
            tris.append((idx[(k - 1) % len(idx)], idx[k], idx[(k + 1) % len(idx)]))
            idx.pop(k)
    if len(idx) == 3:
        tris.append(tuple(idx))
    # map back to original ring orientation
    if ring_area(np.asarray(ring, dtype=float)) < 0:
        m = len(ring)
        remap = {i: m - 1 - i for i in range(m)}
        tris = [(remap[a], remap[b], remap[c]) for a, b, c in tris]
    return tris


def _point_in_triangle(p, a, b, c) -> bool:
    def cross(o, u, w):
        return (u[0] - o[0]) * (w[1] - o[1]) - (u[1] - o[1]) * (w[0] - o[0])

    d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    return d1 >= -1e-12 and d2 >= -1e-12 and d3 >= -1e-12


def polygon_intersection_area(ring_a, ring_b) -> float:
    """Area of the intersection of two simple 2D rings.

    Ring b is triangulated; ring a is clipped against each (convex)
    triangle by three half-plane cuts, so non-convex inputs work.
    """
    a = ensure_ccw(np.asarray(ring_a, dtype=float))
    b = ensure_ccw(np.asarray(ring_b, dtype=float))
    total = 0.0
    for i0, i1, i2 in triangulate_ring(b):
        tri = b[[i0, i1, i2]]
        pieces = [a]
        for k in range(3):
            p, q = tri[k], tri[(k + 1) % 3]
            n = np.array([-(q[1] - p[1]), q[0] - p[0]])  # inward for CCW
            c = -float(n @ p)
            nxt = []
            for piece in pieces:
                _, pos = split_ring_by_line(piece, n, c)
                nxt.extend(pos)
            pieces = nxt
            if not pieces:
                break
        total += sum(abs(ring_area(p)) for p in pieces)
    return total


# ---------------------------------------------------------------------------
# vertex pool with snap-tolerance welding


class VertexPool:
    """Deduplicates 3D vertices within the snap tolerance.

    Uses a uniform grid hash; a new vertex merges with the first stored
    vertex found within ``tol`` (deterministic given insertion order).
    """

    def __init__(self, tol=SNAP_TOL):
        self.tol = tol
        self._grid = {}
        self.points: list = []

    def add(self, p) -> int:
        p = np.asarray(p, dtype=float)
        cell = tuple(np.floor(p / self.tol).astype(np.int64))
        best = None
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for idx in self._grid.get((cell[0] + dx, cell[1] + dy, cell[2] + dz), ()):
                        if np.linalg.norm(self.points[idx] - p) <= self.tol:
                            if best is None or idx < best:
                                best = idx
        if best is not None:
            return best
        idx = len(self.points)
        self.points.append(p)
        self._grid.setdefault(cell, []).append(idx)
        return idx

    def array(self) -> np.ndarray:
        return np.asarray(self.points) if self.points else np.zeros((0, 3))


# ---------------------------------------------------------------------------
# surface mesh


@dataclass
class SurfaceMesh:
    """Indexed polygonal mesh; faces are vertex-index rings."""

    vertices: np.ndarray
    faces: list = field(default_factory=list)

    def edge_table(self) -> dict:
        """Undirected edge -> list of incident face ids."""
        table: dict = {}
        for fi, face in enumerate(self.faces):
            m = len(face)
            for i in range(m):
                a, b = face[i], face[(i + 1) % m]
                key = (a, b) if a < b else (b, a)
                table.setdefault(key, []).append(fi)
        return table

    def face_points(self, fi) -> np.ndarray:
        return self.vertices[np.asarray(self.faces[fi], dtype=int)]

    def signed_volume(self) -> float:
        total = 0.0
        for face in self.faces:
            pts = self.vertices[np.asarray(face, dtype=int)]
            for i in range(1, len(pts) - 1):
                total += float(np.dot(np.cross(pts[0], pts[i]), pts[i + 1])) / 6.0
        return total

    def finalize(self) -> "SurfaceMesh":
        """Check watertight 2-manifold structure; raises NonManifoldResult."""
        nv = len(self.vertices)
        for face in self.faces:
            if len(face) < 3:
                raise NonManifoldResult("face with fewer than 3 vertices")
            if any(i < 0 or i >= nv for i in face):
                raise NonManifoldResult("face index out of range")
            if face_area_3d(self.vertices[np.asarray(face, dtype=int)]) < 1e-12:
                raise NonManifoldResult("zero-area face")
        bad = [e for e, fs in self.edge_table().items() if len(fs) != 2]
        if bad:
            raise NonManifoldResult(f"{len(bad)} edges without exactly 2 incident faces")
        return self
