"""Wall line inference from height-discontinuity pixels.

Contour pixels are triangulated and simplified by greedy half-edge
collapse. Each pixel carries unit mass and is assigned to a surviving
vertex (zero cost) or edge; an edge's cost is the squared-distance
transport of its pixels onto a uniform measure along the edge. Collapses
are applied cheapest-first while the cumulative cost increase stays
within the ``epsilon_c`` budget and no pixel strays beyond ``epsilon_d``
from its assigned edge.

The surviving solid edges are chained into polylines, snapped to a small
set of shared directions and offsets, and turned into vertical wall
planes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import DegenerateInput, OpenBoundary, TooFewPixels
from .geom import (
    Plane,
    Polygon2,
    line_intersection_2d,
    ring_area,
    seg_points_distance,
)


@dataclass
class TraceStats:
    """Instrumentation for one simplification run."""

    collapses: int = 0
    cost_used: float = 0.0
    hausdorff_retained: float = 0.0
    hausdorff_all: float = 0.0
    n_pixels: int = 0
    n_retained: int = 0


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


class _Simplifier:
    """Mutable collapse state over the pixel triangulation.

    Costs are cached per edge; the heap is lazy (entries carry version
    stamps and are re-evaluated on pop), and candidates that were
    infeasible get re-checked eagerly when their neighborhood changes.
    """

    def __init__(self, pixels, eps_d, eps_c):
        self.P = np.asarray(pixels, dtype=float)
        self.pos = [(float(x), float(y)) for x, y in self.P]
        self.eps_d = float(eps_d)
        self.eps_c = float(eps_c)
        n = len(self.P)
        try:
            tri = Delaunay(self.P)
        except QhullError:
            try:
                tri = Delaunay(self.P, qhull_options="QJ")
            except QhullError:
                raise DegenerateInput("contour pixels are collinear")
        self.adj = [set() for _ in range(n)]
        for simplex in tri.simplices:
            for i in range(3):
                a, b = int(simplex[i]), int(simplex[(i + 1) % 3])
                self.adj[a].add(b)
                self.adj[b].add(a)
        self.alive = [True] * n
        self.vertex_pts = {v: [v] for v in range(n)}
        self.edge_pts: dict = {}
        self.cost_cache: dict = {}
        self.cost_used = 0.0
        self.collapses = 0

    # -- cost model ---------------------------------------------------------

    def _cost_of(self, pts, a, b) -> float:
        """Transport cost of pixel set ``pts`` onto segment a-b."""
        if not pts:
            return 0.0
        ax, ay = self.pos[a]
        bx, by = self.pos[b]
        dx, dy = bx - ax, by - ay
        length = (dx * dx + dy * dy) ** 0.5
        if length < 1e-12:
            return sum(
                (self.pos[p][0] - ax) ** 2 + (self.pos[p][1] - ay) ** 2 for p in pts
            )
        ux, uy = dx / length, dy / length
        normal = 0.0
        ts = []
        for p in pts:
            rx, ry = self.pos[p][0] - ax, self.pos[p][1] - ay
            t = rx * ux + ry * uy
            tc = min(max(t, 0.0), length)
            ex, ey = rx - tc * ux, ry - tc * uy
            normal += ex * ex + ey * ey
            ts.append(tc)
        ts.sort()
        step = length / len(ts)
        tangential = sum((t - (i + 0.5) * step) ** 2 for i, t in enumerate(ts))
        return normal + tangential

    def edge_cost(self, a, b) -> float:
        key = _edge_key(a, b)
        c = self.cost_cache.get(key)
        if c is None:
            c = self._cost_of(self.edge_pts.get(key, ()), a, b)
            self.cost_cache[key] = c
        return c

    def _point_seg_dist(self, p, a, b) -> float:
        px, py = self.pos[p]
        ax, ay = self.pos[a]
        bx, by = self.pos[b]
        dx, dy = bx - ax, by - ay
        denom = dx * dx + dy * dy
        if denom < 1e-30:
            return ((px - ax) ** 2 + (py - ay) ** 2) ** 0.5
        t = min(max(((px - ax) * dx + (py - ay) * dy) / denom, 0.0), 1.0)
        ex, ey = px - ax - t * dx, py - ay - t * dy
        return (ex * ex + ey * ey) ** 0.5

    # -- collapse simulation ------------------------------------------------

    def evaluate(self, v, u):
        """Cost delta for collapsing v into u, or None when a pixel would
        end up farther than eps_d from every receiving edge."""
        if not (self.alive[v] and self.alive[u]) or u not in self.adj[v]:
            return None
        moved = list(self.vertex_pts.get(v, ()))
        for w in self.adj[v]:
            pts = self.edge_pts.get(_edge_key(v, w))
            if pts:
                moved.extend(pts)
        new_neighbors = sorted((self.adj[u] | self.adj[v]) - {u, v})
        old_cost = 0.0
        for w in self.adj[v]:
            old_cost += self.edge_cost(v, w)
        for w in self.adj[u]:
            if w != v:
                old_cost += self.edge_cost(u, w)

        new_pts = {
            w: list(self.edge_pts.get(_edge_key(u, w), ())) for w in new_neighbors
        }
        if moved:
            if not new_neighbors:
                return None
            # near-ties go to the shorter edge, keeping corner pixels off
            # long chords that pass through the corner vertex
            lengths = {
                w: ((self.pos[w][0] - self.pos[u][0]) ** 2
                    + (self.pos[w][1] - self.pos[u][1]) ** 2) ** 0.5
                for w in new_neighbors
            }
            for p in moved:
                best_w, best_key, best_d = None, None, None
                for w in new_neighbors:
                    d = self._point_seg_dist(p, u, w)
                    k = d + 1e-6 * lengths[w]
                    if best_key is None or k < best_key:
                        best_w, best_key, best_d = w, k, d
                if best_d is None or best_d > self.eps_d:
                    return None
                new_pts[best_w].append(p)

        new_cost = 0.0
        new_costs = {}
        for w in new_neighbors:
            c = self._cost_of(new_pts[w], u, w)
            new_costs[w] = c
            new_cost += c
        return new_cost - old_cost, new_neighbors, new_pts, new_costs

    def apply(self, v, u, new_neighbors, new_pts, new_costs, delta):
        for w in self.adj[v]:
            key = _edge_key(v, w)
            self.edge_pts.pop(key, None)
            self.cost_cache.pop(key, None)
            self.adj[w].discard(v)
        for w in new_neighbors:
            self.adj[u].add(w)
            self.adj[w].add(u)
            key = _edge_key(u, w)
            self.edge_pts[key] = new_pts[w]
            self.cost_cache[key] = new_costs[w]
        self.adj[u].discard(v)
        self.adj[v] = set()
        self.alive[v] = False
        self.vertex_pts.pop(v, None)
        self.cost_used += max(0.0, delta)
        self.collapses += 1

    # -- greedy driver ------------------------------------------------------

    def run(self):
        heap = []
        neg_inf = float("-inf")
        infeasible: set = set()
        infeasible_at: dict = {}

        def mark_infeasible(v, u):
            infeasible.add((v, u))
            infeasible_at.setdefault(v, set()).add((v, u))
            infeasible_at.setdefault(u, set()).add((v, u))

        def clear_infeasible(v, u):
            infeasible.discard((v, u))
            infeasible_at.get(v, set()).discard((v, u))
            infeasible_at.get(u, set()).discard((v, u))

        for a in range(len(self.P)):
            for b in self.adj[a]:
                heapq.heappush(heap, (neg_inf, a, b))

        while heap:
            _, v, u = heapq.heappop(heap)
            if not (self.alive[v] and self.alive[u]) or u not in self.adj[v]:
                continue
            if (v, u) in infeasible:
                continue
            res = self.evaluate(v, u)
            if res is None:
                mark_infeasible(v, u)
                continue
            delta = res[0]
            if heap and delta > heap[0][0] + 1e-15:
                heapq.heappush(heap, (delta, v, u))
                continue
            if self.cost_used + max(0.0, delta) > self.eps_c:
                break
            _, new_neighbors, new_pts, new_costs = res
            prev_u = set(self.adj[u])
            self.apply(v, u, new_neighbors, new_pts, new_costs, delta)
            # stale heap entries refresh themselves on pop; only edges
            # created by this collapse and formerly infeasible pairs in
            # the dirty neighborhood need new entries
            for w in new_neighbors:
                if w not in prev_u and self.alive[w]:
                    heapq.heappush(heap, (neg_inf, u, w))
                    heapq.heappush(heap, (neg_inf, w, u))
            retry = set(infeasible_at.get(u, ()))
            for w in new_neighbors:
                retry.update(infeasible_at.get(w, ()))
            for (x, y) in sorted(retry):
                clear_infeasible(x, y)
                if self.alive[x] and self.alive[y] and y in self.adj[x]:
                    heapq.heappush(heap, (neg_inf, x, y))
        return self

    # -- output -------------------------------------------------------------

    def solid_edges(self):
        return [e for e, pts in self.edge_pts.items() if pts]


def _components(edges):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for a, b in edges:
        groups.setdefault(find(a), []).append((a, b))
    return list(groups.values())


def _chain_component(edges, positions):
    """Walk a component's edges into polylines; chains split at
    junction vertices (degree over 2). Closed loops come back with the
    first vertex repeated at the end."""
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for v in adj:
        adj[v].sort()
    degree = {v: len(ns) for v, ns in adj.items()}
    unused = set(_edge_key(a, b) for a, b in edges)
    chains = []

    def walk(start, nxt):
        chain = [start, nxt]
        unused.discard(_edge_key(start, nxt))
        while degree[chain[-1]] == 2:
            prev, cur = chain[-2], chain[-1]
            options = [w for w in adj[cur] if w != prev and _edge_key(cur, w) in unused]
            if not options:
                break
            w = options[0]
            unused.discard(_edge_key(cur, w))
            chain.append(w)
        return chain

    endpoints = sorted(v for v, d in degree.items() if d != 2)
    for v in endpoints:
        for w in list(adj[v]):
            if _edge_key(v, w) in unused:
                chains.append(walk(v, w))
    # leftover pure cycles
    while unused:
        a, b = min(unused)
        chain = walk(a, b)
        if chain[0] != chain[-1] and chain[-1] in adj and chain[0] in adj[chain[-1]]:
            chain.append(chain[0])
        chains.append(chain)
    return [np.asarray([positions[v] for v in chain]) for chain in chains]


def simplify_contours(pixels, eps_d=0.25, eps_c=2.0, min_group=5):
    """Reduce contour pixels to polylines.

    Returns ``(polylines, stats)``; polylines are (k, 2) vertex arrays,
    closed ones repeat their first vertex. Connected pixel groups whose
    total support is below ``min_group`` are dropped.
    """
    P = np.asarray(pixels, dtype=float)
    stats = TraceStats(n_pixels=len(P))
    if len(P) == 0:
        return [], stats
    if len(P) < 3 or _collinear(P):
        line = _collinear_polyline(P)
        stats.n_retained = len(P) if len(P) >= min_group else 0
        if stats.n_retained == 0:
            return [], stats
        d = seg_points_distance(P, line[0], line[1])
        stats.hausdorff_retained = stats.hausdorff_all = float(d.max())
        return [line], stats

    sim = _Simplifier(P, eps_d, eps_c).run()
    stats.collapses = sim.collapses
    stats.cost_used = sim.cost_used

    solid = sim.solid_edges()
    # pixels still assigned to vertices join via their incident edges
    comps = _components(solid)
    polylines = []
    retained_pixels = []
    all_segments = []
    for comp_edges in comps:
        verts = set()
        support = 0
        for a, b in comp_edges:
            verts.update((a, b))
            support += len(sim.edge_pts.get(_edge_key(a, b), ()))
        for v in verts:
            support += len(sim.vertex_pts.get(v, ()))
        segs = [(sim.P[a], sim.P[b]) for a, b in comp_edges]
        if support < min_group:
            continue
        for a, b in comp_edges:
            retained_pixels.extend(sim.edge_pts.get(_edge_key(a, b), ()))
        for v in verts:
            retained_pixels.extend(sim.vertex_pts.get(v, ()))
        all_segments.extend(segs)
        polylines.extend(_chain_component(comp_edges, sim.P))

    stats.n_retained = len(retained_pixels)
    if all_segments:
        stats.hausdorff_all = _hausdorff(P, all_segments)
        if retained_pixels:
            stats.hausdorff_retained = _hausdorff(
                P[np.asarray(sorted(retained_pixels))], all_segments
            )
    polylines.sort(key=lambda pl: (-len(pl), pl[0, 0], pl[0, 1]))
    return polylines, stats


def _hausdorff(points, segments):
    if len(points) == 0:
        return 0.0
    dmin = np.full(len(points), np.inf)
    for a, b in segments:
        dmin = np.minimum(dmin, seg_points_distance(points, a, b))
    return float(dmin.max())


def _collinear(P, tol=1e-9):
    if len(P) < 3:
        return True
    centered = P - P.mean(axis=0)
    _, s, _ = np.linalg.svd(centered, full_matrices=False)
    return s[1] <= tol * max(1.0, s[0])


def _collinear_polyline(P):
    centered = P - P.mean(axis=0)
    if len(P) == 1:
        return np.array([P[0], P[0]])
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    u = vt[0]
    t = centered @ u
    lo, hi = P[np.argmin(t)], P[np.argmax(t)]
    return np.array([lo, hi])


# ---------------------------------------------------------------------------
# regularity enhancement


def _angdiff(a, b):
    d = abs(a - b) % np.pi
    return min(d, np.pi - d)


def _unit(theta):
    """Unit direction for an angle; components under 1e-12 become exact
    zeros so that lines snapped to the axes intersect without trig
    residue (cos(pi/2) is 6.1e-17, not 0)."""
    u = np.array([np.cos(theta), np.sin(theta)])
    u[np.abs(u) < 1e-12] = 0.0
    return u / np.hypot(u[0], u[1])


@dataclass
class _Seg:
    poly: int
    pos: int
    a: np.ndarray
    b: np.ndarray
    theta: float = 0.0
    length: float = 0.0
    cluster: int = -1
    final_theta: float = 0.0
    final_offset: float = 0.0

    def __post_init__(self):
        d = self.b - self.a
        self.length = float(np.hypot(d[0], d[1]))
        self.theta = float(np.arctan2(d[1], d[0]) % np.pi)

    def normal(self):
        u = _unit(self.final_theta)
        return np.array([-u[1], u[0]])

    def line(self):
        """(normal, offset) with n.p = offset for points p on the line."""
        return self.normal(), self.final_offset


def _weighted_mean_theta(segs):
    s = sum(seg.length * np.sin(2 * seg.theta) for seg in segs)
    c = sum(seg.length * np.cos(2 * seg.theta) for seg in segs)
    return float(0.5 * np.arctan2(s, c) % np.pi)


def regularize(polylines, footprint: Polygon2 | None = None,
               angle_tol_deg=20.0, offset_tol=0.3):
    """Snap polyline segments to shared directions and merge near
    collinear lines.

    Directions cluster within the angle tolerance; a cluster adopts the
    nearest footprint edge direction when one is close enough, otherwise
    near-orthogonal clusters snap to exact right angles against the
    dominant direction. Parallel lines with offsets within ``offset_tol``
    meters merge into their length-weighted average.
    """
    tol = np.radians(angle_tol_deg)
    segs = []
    for pi, pl in enumerate(polylines):
        pts = np.asarray(pl, dtype=float)
        closed = len(pts) > 3 and np.allclose(pts[0], pts[-1])
        body = pts[:-1] if closed else pts
        count = len(body) if closed else len(body) - 1
        for j in range(count):
            a = body[j]
            b = body[(j + 1) % len(body)]
            s = _Seg(pi, j, a.copy(), b.copy())
            if s.length > 1e-9:
                segs.append(s)
    if not segs:
        return []

    # directional clustering
    order = sorted(range(len(segs)), key=lambda i: segs[i].theta)
    clusters = []
    for i in order:
        seg = segs[i]
        placed = False
        for ci, members in enumerate(clusters):
            ref = _weighted_mean_theta([segs[m] for m in members])
            if _angdiff(seg.theta, ref) < tol:
                members.append(i)
                seg.cluster = ci
                placed = True
                break
        if not placed:
            seg.cluster = len(clusters)
            clusters.append([i])

    thetas = [_weighted_mean_theta([segs[m] for m in members]) for members in clusters]
    weights = [sum(segs[m].length for m in members) for members in clusters]

    fp_dirs = []
    if footprint is not None:
        for a, b in footprint.edges():
            d = np.asarray(b) - np.asarray(a)
            if np.hypot(*d) > 1e-9:
                fp_dirs.append(float(np.arctan2(d[1], d[0]) % np.pi))

    dominant = int(np.argmax(weights))
    for ci in range(len(clusters)):
        snapped = False
        if fp_dirs:
            best = min(fp_dirs, key=lambda t: _angdiff(t, thetas[ci]))
            if _angdiff(best, thetas[ci]) < tol:
                thetas[ci] = best
                snapped = True
        if not snapped and ci != dominant:
            perp = (thetas[dominant] + np.pi / 2) % np.pi
            if _angdiff(thetas[ci], perp) < tol:
                thetas[ci] = perp
            elif _angdiff(thetas[ci], thetas[dominant]) < tol:
                thetas[ci] = thetas[dominant]

    # fold weak minority clusters into the nearest strong direction;
    # short connector runs between straight walls are tracing noise
    anchors = [
        thetas[ci] for ci in range(len(clusters))
        if weights[ci] >= 0.5 * weights[dominant]
    ]
    for ci in range(len(clusters)):
        if weights[ci] >= 0.5 * weights[dominant]:
            continue
        best = min(anchors, key=lambda t: _angdiff(t, thetas[ci]))
        if _angdiff(best, thetas[ci]) <= np.pi / 4:
            thetas[ci] = best

    # rotate each segment about its midpoint, then merge parallel offsets
    for seg in segs:
        seg.final_theta = thetas[seg.cluster]
        mid = (seg.a + seg.b) / 2.0
        seg.final_offset = float(seg.normal() @ mid)

    by_theta = {}
    for i, seg in enumerate(segs):
        by_theta.setdefault(round(seg.final_theta, 9), []).append(i)
    for theta_key, idxs in by_theta.items():
        idxs.sort(key=lambda i: segs[i].final_offset)
        group = [idxs[0]]
        groups = [group]
        for i in idxs[1:]:
            if segs[i].final_offset - segs[group[-1]].final_offset <= offset_tol:
                group.append(i)
            else:
                group = [i]
                groups.append(group)
        for group in groups:
            total = sum(segs[i].length for i in group)
            merged = sum(segs[i].length * segs[i].final_offset for i in group) / total
            for i in group:
                segs[i].final_offset = merged

    # rebuild the polylines from the snapped lines
    by_poly = {}
    for seg in segs:
        by_poly.setdefault(seg.poly, []).append(seg)
    out = []
    for pi, pl in enumerate(polylines):
        plsegs = sorted(by_poly.get(pi, []), key=lambda s: s.pos)
        if not plsegs:
            continue
        pts = np.asarray(pl, dtype=float)
        closed = len(pts) > 3 and np.allclose(pts[0], pts[-1])
        plsegs = _absorb_jogs(plsegs, closed)
        out.extend(_rebuild(plsegs, closed))
    return [pl for pl in out if len(pl) >= 2]


def _absorb_jogs(plsegs, closed):
    """Drop connector segments whose two neighbors snapped onto one
    line; the neighbors fuse into a single straight run."""
    changed = True
    while changed and len(plsegs) > 2:
        changed = False
        m = len(plsegs)
        for i in range(m):
            if not closed and (i == 0 or i == m - 1):
                continue
            prev = plsegs[(i - 1) % m]
            nxt = plsegs[(i + 1) % m]
            cur = plsegs[i]
            if _same_line(prev, nxt) and not _same_line(cur, prev):
                plsegs = plsegs[:i] + plsegs[i + 1 :]
                changed = True
                break
    return plsegs


def _line_point(seg: _Seg, t):
    return seg.normal() * seg.final_offset + _unit(seg.final_theta) * t


def _project_t(seg: _Seg, p):
    return float(np.asarray(p) @ _unit(seg.final_theta))


def _same_line(s1: _Seg, s2: _Seg):
    return (
        abs(s1.final_theta - s2.final_theta) < 1e-9
        and abs(s1.final_offset - s2.final_offset) < 1e-9
    )


def _rebuild(plsegs, closed):
    """Re-intersect consecutive snapped segments into clean polylines."""
    merged = [plsegs[0]]
    for seg in plsegs[1:]:
        if _same_line(merged[-1], seg):
            merged[-1] = _Seg(seg.poly, merged[-1].pos, merged[-1].a, seg.b)
            merged[-1].final_theta = seg.final_theta
            merged[-1].final_offset = seg.final_offset
        else:
            merged.append(seg)
    if closed and len(merged) > 1 and _same_line(merged[0], merged[-1]):
        merged[0] = _Seg(merged[0].poly, merged[0].pos, merged[-1].a, merged[0].b)
        theta, off = merged[-1].final_theta, merged[-1].final_offset
        merged[0].final_theta, merged[0].final_offset = theta, off
        merged.pop()

    if len(merged) == 1:
        seg = merged[0]
        t0, t1 = _project_t(seg, seg.a), _project_t(seg, seg.b)
        return [np.array([_line_point(seg, t0), _line_point(seg, t1)])]

    def junction(s1, s2):
        n1, c1 = s1.line()
        n2, c2 = s2.line()
        pt = line_intersection_2d(n1, -c1, n2, -c2)
        mid = (s1.b + s2.a) / 2.0
        if pt is not None:
            reach = 2.0 * (s1.length + s2.length) + 1.0
            if np.linalg.norm(pt - mid) <= reach:
                return [pt]
        # parallel lines or a wild intersection: connect with a jog
        t = (_project_t(s1, s1.b) + _project_t(s2, s2.a)) / 2.0
        return [_line_point(s1, t), _line_point(s2, t)]

    pts = []
    m = len(merged)
    pairs = range(m) if closed else range(m - 1)
    joints = {}
    for i in pairs:
        joints[i] = junction(merged[i], merged[(i + 1) % m])
    if closed:
        pts = []
        for i in range(m):
            prev_j = joints[(i - 1) % m]
            pts.append(prev_j[-1])
        ring = []
        for i in range(m):
            ring.append(pts[i])
            extra = joints[i]
            if len(extra) == 2:
                ring.append(extra[0])
        ring.append(ring[0])
        return [np.asarray(ring)]
    chain = [_line_point(merged[0], _project_t(merged[0], merged[0].a))]
    for i in range(m - 1):
        chain.extend(joints[i])
    chain.append(_line_point(merged[-1], _project_t(merged[-1], merged[-1].b)))
    return [np.asarray(chain)]


# ---------------------------------------------------------------------------
# wall line extraction


@dataclass
class WallLine:
    """A vertical wall plane with its evidence intervals along the line."""

    plane: Plane
    origin: np.ndarray
    direction: np.ndarray
    intervals: list
    outer: bool
    source: str  # 'footprint' or 'inferred'


@dataclass
class WallSet:
    lines: list
    outer_loop: Polygon2
    z_ground: float
    stats: TraceStats | None = None


def _merge_intervals(intervals, gap=0.0):
    if not intervals:
        return []
    ivs = sorted((min(a, b), max(a, b)) for a, b in intervals)
    out = [list(ivs[0])]
    for lo, hi in ivs[1:]:
        if lo <= out[-1][1] + gap:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(iv) for iv in out]


def _wall_from_segments(segments, outer, source, gap=0.05):
    """One WallLine per distinct supporting line; segments on the same
    geometric line merge regardless of traversal direction."""
    buckets = {}
    for a, b in segments:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        if np.hypot(d[0], d[1]) < 1e-9:
            continue
        plane = Plane.from_normal_point([-d[1], d[0], 0.0], [a[0], a[1], 0.0])
        buckets.setdefault(plane.key(), (plane, []))[1].append((a, b))
    lines = []
    for key in sorted(buckets):
        plane, segs = buckets[key]
        n2 = plane.normal[:2]
        u = np.array([n2[1], -n2[0]])
        origin = -plane.d * n2
        ivs = _merge_intervals([(float(a @ u), float(b @ u)) for a, b in segs], gap=gap)
        lines.append(WallLine(plane, origin, u, ivs, outer, source))
    return lines


def _polyline_segments(pl):
    pts = np.asarray(pl, dtype=float)
    return [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]


def _endpoint_clusters(chains, join_tol):
    """Union endpoints closer than ``join_tol`` into shared node ids.

    Returns ``(starts, ends)`` mapping chain index to node id.
    """
    pts = []
    for ch in chains:
        pts.append(np.asarray(ch[0], dtype=float))
        pts.append(np.asarray(ch[-1], dtype=float))
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tol = max(join_tol, 1e-9)
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(pts[i] - pts[j])) <= tol:
                parent[find(i)] = find(j)
    roots = [find(i) for i in range(n)]
    starts = {ci: roots[2 * ci] for ci in range(len(chains))}
    ends = {ci: roots[2 * ci + 1] for ci in range(len(chains))}
    return starts, ends


def _append_chain(path, pts):
    if path and np.hypot(*(path[-1] - pts[0])) < 1e-9:
        pts = pts[1:]
    path.extend(np.asarray(p, dtype=float) for p in pts)


def _largest_cycle(chains, starts, ends):
    """Largest closed face of a connected chain graph.

    Walks from every directed chain, always taking the most clockwise
    continuation; each walk that returns to its first chain traces one
    face of the arrangement, and the biggest enclosed area wins. Returns
    ``(ring_points, used_chain_ids)`` or ``None`` when nothing closes.
    """
    node_edges = {}
    for ci in chains:
        node_edges.setdefault(starts[ci], []).append((ci, True))
        node_edges.setdefault(ends[ci], []).append((ci, False))

    def oriented(ci, fwd):
        return chains[ci] if fwd else chains[ci][::-1]

    def polar(edge):
        pts = oriented(*edge)
        d = pts[1] - pts[0]
        return float(np.arctan2(d[1], d[0]))

    def tail(edge):
        ci, fwd = edge
        return ends[ci] if fwd else starts[ci]

    best_ring, best_used, best_area = None, None, 0.0
    for e0 in [(ci, fwd) for ci in sorted(chains) for fwd in (True, False)]:
        cur, used = e0, {e0}
        path = []
        _append_chain(path, oriented(*cur))
        ok = False
        for _ in range(2 * len(chains) + 2):
            node = tail(cur)
            d_in = path[-1] - path[-2]
            back = float(np.arctan2(-d_in[1], -d_in[0]))
            nxt, nxt_rot = None, None
            for cand in node_edges[node]:
                if cand == (cur[0], not cur[1]):
                    continue  # no U-turn onto the arriving chain
                rot = (polar(cand) - back) % (2.0 * np.pi)
                if rot < 1e-12:
                    rot = 2.0 * np.pi
                if nxt_rot is None or rot < nxt_rot:
                    nxt, nxt_rot = cand, rot
            if nxt is None or (nxt in used and nxt != e0):
                break
            if nxt == e0:
                ok = True
                break
            used.add(nxt)
            cur = nxt
            _append_chain(path, oriented(*cur))
        if not ok:
            continue
        area = abs(ring_area(np.asarray(path)))
        if area > best_area:
            ring = list(path)
            ring.append(ring[0].copy())
            best_ring, best_used, best_area = ring, {c for c, _ in used}, area
    if best_ring is None:
        return None
    return best_ring, best_used


def stitch_chains(polylines, join_tol=0.0):
    """Reconnect polylines that the pixel tracer split at junctions.

    Endpoints within ``join_tol`` of each other count as the same node.
    Chains meeting end-to-end where nothing else attaches are merged;
    dangling spurs are kept but stay separate; if a cycle with junction
    points remains, its largest enclosed loop is traced into one closed
    polyline so downstream stages can recognize an outer boundary.
    """
    closed, chains, spurs = [], [], []
    for pl in polylines:
        pts = [np.asarray(p, dtype=float) for p in np.asarray(pl, dtype=float)]
        if len(pts) < 2:
            continue
        if len(pts) > 3 and np.allclose(pts[0], pts[-1]):
            closed.append(np.asarray(pts))
        else:
            chains.append(pts)

    min_area = max(4.0 * join_tol * join_tol, 1e-12)
    changed = True
    while changed and chains:
        changed = False
        starts, ends = _endpoint_clusters(chains, join_tol)
        degree = {}
        for ci in range(len(chains)):
            for node in (starts[ci], ends[ci]):
                degree.setdefault(node, []).append(ci)
        for node in sorted(degree):
            members = degree[node]
            if len(members) != 2:
                continue
            ca, cb = members
            if ca == cb:
                ring = chains.pop(ca)
                if abs(ring_area(np.asarray(ring))) > min_area:
                    ring.append(ring[0].copy())
                    closed.append(np.asarray(ring))
            else:
                a = chains[ca] if ends[ca] == node else chains[ca][::-1]
                b = chains[cb] if starts[cb] == node else chains[cb][::-1]
                merged = list(a)
                _append_chain(merged, b)
                chains = [c for i, c in enumerate(chains) if i not in (ca, cb)]
                chains.append(merged)
            changed = True
            break
        if changed:
            continue
        for node in sorted(degree):
            if len(degree[node]) == 1:
                spurs.append(chains.pop(degree[node][0]))
                changed = True
                break

    while chains:
        starts, ends = _endpoint_clusters(chains, join_tol)
        comp, frontier = {0}, {0}
        while frontier:
            nodes = {starts[ci] for ci in comp} | {ends[ci] for ci in comp}
            grown = {
                ci for ci in range(len(chains))
                if starts[ci] in nodes or ends[ci] in nodes
            }
            frontier = grown - comp
            comp = grown
        walk = _largest_cycle({ci: chains[ci] for ci in sorted(comp)}, starts, ends)
        if walk is not None:
            path, used = walk
            closed.append(np.asarray(path))
            drop = used
        else:
            drop = comp
        spurs.extend(chains[ci] for ci in sorted(comp - drop))
        chains = [c for i, c in enumerate(chains) if i not in comp]

    return closed + [np.asarray(c) for c in spurs]


def assemble_outer_loop(polylines):
    """Largest-area closed polyline as the outer boundary."""
    best, best_area = None, 0.0
    for pl in polylines:
        pts = np.asarray(pl, dtype=float)
        if len(pts) > 3 and np.allclose(pts[0], pts[-1]):
            area = abs(ring_area(pts[:-1]))
            if area > best_area:
                best, best_area = pts[:-1], area
    if best is None:
        raise OpenBoundary("no closed outer boundary could be traced")
    return Polygon2.create(best)


def extrude(polylines, z_ground, footprint: Polygon2 | None = None,
            resolution=0.2, stats: TraceStats | None = None,
            min_evidence=0.0) -> WallSet:
    """Turn regularized polylines into vertical wall lines.

    With a footprint, its edges become the outer walls and inferred
    lines hugging the boundary (within 1.5 pixels) are suppressed;
    without one, the largest closed polyline becomes the boundary.
    Inner lines whose merged evidence intervals total less than
    ``min_evidence`` meters are treated as tracing noise and dropped.
    """
    near = 1.5 * resolution
    if footprint is not None:
        outer_loop = footprint
        boundary_segments = list(footprint.edges())
        lines = _wall_from_segments(boundary_segments, outer=True, source="footprint")
        inner_segments = []
        for pl in polylines:
            for a, b in _polyline_segments(pl):
                probes = np.linspace(a, b, 5)
                dmin = np.full(len(probes), np.inf)
                for fa, fb in boundary_segments:
                    dmin = np.minimum(dmin, seg_points_distance(probes, fa, fb))
                if np.max(dmin) > near:
                    inner_segments.append((a, b))
        lines += _wall_from_segments(inner_segments, outer=False, source="inferred")
    else:
        outer_loop = assemble_outer_loop(polylines)
        boundary_segments = [
            (outer_loop.outer[i], outer_loop.outer[(i + 1) % len(outer_loop.outer)])
            for i in range(len(outer_loop.outer))
        ]
        lines = _wall_from_segments(boundary_segments, outer=True, source="inferred")
        inner_segments = []
        for pl in polylines:
            for a, b in _polyline_segments(pl):
                probes = np.linspace(a, b, 5)
                dmin = np.full(len(probes), np.inf)
                for fa, fb in boundary_segments:
                    dmin = np.minimum(dmin, seg_points_distance(probes, fa, fb))
                if np.max(dmin) > near:
                    inner_segments.append((a, b))
        lines += _wall_from_segments(inner_segments, outer=False, source="inferred")
    if min_evidence > 0:
        lines = [
            ln for ln in lines
            if ln.outer
            or sum(b - a for a, b in ln.intervals) >= min_evidence
        ]
    return WallSet(lines, outer_loop, float(z_ground), stats)
