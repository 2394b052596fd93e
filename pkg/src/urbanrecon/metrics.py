"""Geometric quality metrics for reconstructed meshes.

Point-to-surface error is measured against the exact polygon soup:
faces are ear-clipped into triangles and each point queries a bounding
volume hierarchy for its closest triangle.  A vectorized brute-force
path is kept as an independent oracle for the hierarchy.
"""

from __future__ import annotations

import numpy as np

from .geom import (
    SurfaceMesh,
    face_frame,
    newell_normal,
    seg_points_distance,
    triangulate_ring,
)


# ---------------------------------------------------------------------------
# exact point-to-triangle distance


def triangle_distances(points, a, b, c) -> np.ndarray:
    """Distance from many points to one 3D triangle.

    The closest point is either the orthogonal foot (when it lands
    inside) or a point on one of the three boundary segments; taking
    the minimum over both cases is exact for degenerate triangles too.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.minimum(
        seg_points_distance(pts, a, b), seg_points_distance(pts, b, c)
    )
    d = np.minimum(d, seg_points_distance(pts, c, a))
    n = np.cross(b - a, c - a)
    nn = float(np.linalg.norm(n))
    if nn > 1e-12:
        n = n / nn
        t = (pts - a) @ n
        foot = pts - t[:, None] * n
        v0, v1 = b - a, c - a
        v2 = foot - a
        d00 = float(v0 @ v0)
        d01 = float(v0 @ v1)
        d11 = float(v1 @ v1)
        denom = d00 * d11 - d01 * d01
        d20 = v2 @ v0
        d21 = v2 @ v1
        v = (d11 * d20 - d01 * d21) / denom
        w = (d00 * d21 - d01 * d20) / denom
        inside = (v >= -1e-12) & (w >= -1e-12) & (v + w <= 1 + 1e-12)
        d = np.where(inside, np.minimum(d, np.abs(t)), d)
    return d


def mesh_triangles(mesh: SurfaceMesh):
    """Ear-clip every face; returns (T, 3, 3) corners and face ids."""
    tris = []
    owners = []
    for fi, face in enumerate(mesh.faces):
        pts = mesh.face_points(fi)
        origin, u, v, _ = face_frame(pts)
        local = np.stack([(pts - origin) @ u, (pts - origin) @ v], axis=1)
        for i, j, k in triangulate_ring(local):
            tris.append(pts[[i, j, k]])
            owners.append(fi)
    return np.asarray(tris), np.asarray(owners, dtype=int)


def brute_distances(points, tris) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(pts), np.inf)
    for a, b, c in tris:
        best = np.minimum(best, triangle_distances(pts, a, b, c))
    return best


class TriangleBvh:
    """Median-split AABB tree queried with batched descent.

    Whole point batches walk the tree together; a node is entered only
    by points whose box distance still undercuts their current best,
    so clustered query points share most of the traversal.
    """

    def __init__(self, tris, leaf_size=8):
        self.tris = np.asarray(tris, dtype=float)
        if len(self.tris) == 0:
            raise ValueError("empty triangle set")
        lo = self.tris.min(axis=1)
        hi = self.tris.max(axis=1)
        cent = 0.5 * (lo + hi)
        self.nodes = []  # (lo, hi, left, right, start, end)
        order = np.arange(len(self.tris))

        def build(idx):
            nlo = lo[idx].min(axis=0)
            nhi = hi[idx].max(axis=0)
            me = len(self.nodes)
            self.nodes.append(None)
            if len(idx) <= leaf_size:
                self.nodes[me] = (nlo, nhi, -1, -1, idx)
                return me
            spread = cent[idx].max(axis=0) - cent[idx].min(axis=0)
            axis = int(np.argmax(spread))
            half = len(idx) // 2
            part = idx[np.argsort(cent[idx, axis], kind="stable")]
            left = build(part[:half])
            right = build(part[half:])
            self.nodes[me] = (nlo, nhi, left, right, None)
            return me

        build(order)

    def distances(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(pts), np.inf)
        stack = [(0, np.arange(len(pts)))]
        while stack:
            node, idx = stack.pop()
            nlo, nhi, left, right, members = self.nodes[node]
            gap = np.maximum(nlo - pts[idx], 0.0)
            gap = np.maximum(gap, pts[idx] - nhi)
            box_d = np.linalg.norm(gap, axis=1)
            idx = idx[box_d < best[idx]]
            if len(idx) == 0:
                continue
            if members is not None:
                sub = pts[idx]
                d = best[idx]
                for a, b, c in self.tris[members]:
                    d = np.minimum(d, triangle_distances(sub, a, b, c))
                best[idx] = d
            else:
                stack.append((left, idx))
                stack.append((right, idx))
        return best


def surface_distances(points, mesh: SurfaceMesh) -> np.ndarray:
    tris, _ = mesh_triangles(mesh)
    return TriangleBvh(tris).distances(points)


def rmse(points, mesh: SurfaceMesh) -> float:
    d = surface_distances(points, mesh)
    return float(np.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------------------
# structural validation


def validate_mesh(mesh: SurfaceMesh) -> dict:
    """Structural health report; never raises.

    ``watertight`` needs every edge on exactly two faces traversed in
    opposite directions; ``valid`` additionally requires positive
    enclosed volume and no duplicated faces.
    """
    table = mesh.edge_table()
    edge_defects = sum(1 for fs in table.values() if len(fs) != 2)
    directed = {}
    for face in mesh.faces:
        m = len(face)
        for i in range(m):
            key = (face[i], face[(i + 1) % m])
            directed[key] = directed.get(key, 0) + 1
    oriented = all(v == 1 for v in directed.values()) and all(
        (b, a) in directed for (a, b) in directed
    )
    canon = set()
    duplicates = 0
    for face in mesh.faces:
        key = frozenset(face)
        if key in canon:
            duplicates += 1
        canon.add(key)

    parent = list(range(len(mesh.faces)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for fs in table.values():
        for f in fs[1:]:
            parent[find(f)] = find(fs[0])
    components = len({find(i) for i in range(len(mesh.faces))}) if mesh.faces else 0

    volume = mesh.signed_volume()
    watertight = bool(mesh.faces) and edge_defects == 0 and oriented
    return {
        "n_vertices": int(len(mesh.vertices)),
        "n_faces": int(len(mesh.faces)),
        "n_edges": int(len(table)),
        "edge_defects": int(edge_defects),
        "oriented": bool(oriented),
        "duplicate_faces": int(duplicates),
        "components": int(components),
        "euler": int(len(mesh.vertices) - len(table) + len(mesh.faces)),
        "volume": float(volume),
        "watertight": watertight,
        "valid": watertight and duplicates == 0 and volume > 0,
    }


def vertical_hits(mesh: SurfaceMesh, xy) -> list:
    """Heights where vertical lines pierce non-vertical faces.

    Returns one sorted list of (face id, z) per query point; points
    whose line grazes a face boundary should be nudged by the caller.
    """
    pts = np.atleast_2d(np.asarray(xy, dtype=float))
    hits = [[] for _ in range(len(pts))]
    for fi, face in enumerate(mesh.faces):
        corners = mesh.face_points(fi)
        n = newell_normal(corners)
        nn = np.linalg.norm(n)
        if nn < 1e-14 or abs(n[2]) / nn < 1e-9:
            continue
        n = n / nn
        d = -float(n @ corners[0])
        ring = corners[:, :2]
        x, y = ring[:, 0], ring[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        inside = np.zeros(len(pts), dtype=bool)
        for k in range(len(ring)):
            cond = (y[k] > pts[:, 1]) != (yn[k] > pts[:, 1])
            if not cond.any():
                continue
            t = (pts[:, 1] - y[k]) / (yn[k] - y[k])
            xc = x[k] + t * (xn[k] - x[k])
            inside ^= cond & (pts[:, 0] < xc)
        for pi in np.flatnonzero(inside):
            z = -(d + n[0] * pts[pi, 0] + n[1] * pts[pi, 1]) / n[2]
            hits[pi].append((fi, float(z)))
    for h in hits:
        h.sort(key=lambda t: t[1])
    return hits


# ---------------------------------------------------------------------------
# aggregation


def summarize(records) -> dict:
    """Fold per-building records into one JSON-friendly scene summary."""
    ok = [r for r in records if r.get("status") == "ok"]
    rmses = [r["rmse"] for r in ok if r.get("rmse") is not None]
    out = {
        "n_buildings": len(records),
        "n_ok": len(ok),
        "n_failed": len(records) - len(ok),
        "total_time": float(sum(r.get("seconds", 0.0) for r in records)),
    }
    if ok:
        out["mean_faces"] = float(np.mean([r["n_faces"] for r in ok]))
    if rmses:
        out["rmse_mean"] = float(np.mean(rmses))
        out["rmse_min"] = float(np.min(rmses))
        out["rmse_max"] = float(np.max(rmses))
    return out
