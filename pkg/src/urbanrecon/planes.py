"""Per-point normal estimation and planar segment extraction.

Region growing walks a kNN graph from low-curvature seeds: a point joins
a region when its normal agrees with the seed normal and it stays within
the distance tolerance of the region's (periodically refitted) plane.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import TooFewPoints
from .geom import Plane, fit_plane

REFIT_EVERY = 64


@dataclass
class PlanarSegment:
    """A detected planar region of the building cloud."""

    indices: np.ndarray
    plane: Plane
    vertical: bool = False

    @property
    def support(self) -> int:
        return len(self.indices)


def estimate_normals(xyz, k=16):
    """PCA normals from k nearest neighbors, oriented upward.

    Horizontal normals (n_z ~ 0) are disambiguated by making the first
    non-zero ground component positive.
    """
    pts = np.asarray(xyz, dtype=float)
    n = len(pts)
    if n < 3:
        raise TooFewPoints(f"{n} points is not enough for normal estimation")
    k = min(k, n)
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k)
    neigh = pts[idx]                       # (n, k, 3)
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]                # smallest eigenvalue direction
    flip = normals[:, 2] < 0
    horiz = np.abs(normals[:, 2]) < 1e-12
    first = np.where(np.abs(normals[:, 0]) > 1e-12, normals[:, 0], normals[:, 1])
    flip = np.where(horiz, first < 0, flip)
    normals[flip] *= -1
    return normals, idx


def seed_scores(normals, neighbor_idx):
    """Mean angular deviation from the local average normal; lower is
    flatter, so low scores make better region seeds."""
    mean = normals[neighbor_idx].mean(axis=1)
    norm = np.linalg.norm(mean, axis=1)
    norm[norm < 1e-12] = 1.0
    mean = mean / norm[:, None]
    dots = np.abs(np.einsum("ni,ni->n", normals, mean))
    return np.arccos(np.clip(dots, -1.0, 1.0))


def default_dist_tol(xyz) -> float:
    """2.5x the median nearest-neighbor spacing."""
    pts = np.asarray(xyz, dtype=float)
    tree = cKDTree(pts)
    d, _ = tree.query(pts, k=2)
    med = float(np.median(d[:, 1]))
    return 2.5 * max(med, 1e-6)


def region_grow(
    xyz,
    normals=None,
    neighbor_idx=None,
    k=16,
    angle_tol_deg=20.0,
    dist_tol=None,
    min_support=10,
):
    """Extract planar segments, largest support first.

    Points of regions below ``min_support`` are released so later seeds
    can claim them.
    """
    pts = np.asarray(xyz, dtype=float)
    if normals is None or neighbor_idx is None:
        normals, neighbor_idx = estimate_normals(pts, k=k)
    if dist_tol is None:
        dist_tol = default_dist_tol(pts)
    cos_tol = np.cos(np.radians(angle_tol_deg))

    scores = seed_scores(normals, neighbor_idx)
    order = np.lexsort((np.arange(len(pts)), scores))
    # crease and noise points may join regions but must not start them
    seed_cutoff = max(3.0 * float(np.median(scores)), np.radians(angle_tol_deg) / 2.0)
    assigned = np.zeros(len(pts), dtype=bool)
    consumed_seed = np.zeros(len(pts), dtype=bool)
    segments = []

    for seed in order:
        if assigned[seed] or consumed_seed[seed]:
            continue
        if scores[seed] > seed_cutoff:
            continue
        consumed_seed[seed] = True
        seed_normal = normals[seed]
        plane = Plane.from_normal_point(seed_normal, pts[seed])
        members = [int(seed)]
        assigned[seed] = True
        queue = deque(int(j) for j in neighbor_idx[seed])
        enqueued = set(members) | set(int(j) for j in neighbor_idx[seed])
        since_refit = 0
        while queue:
            j = queue.popleft()
            if assigned[j]:
                continue
            if abs(float(np.dot(normals[j], seed_normal))) < cos_tol:
                continue
            if abs(float(np.dot(plane.normal, pts[j]) + plane.d)) > dist_tol:
                continue
            assigned[j] = True
            members.append(j)
            since_refit += 1
            if since_refit >= REFIT_EVERY and len(members) >= 3:
                try:
                    plane = fit_plane(pts[members])
                except Exception:
                    pass
                since_refit = 0
            for nb in neighbor_idx[j]:
                nb = int(nb)
                if not assigned[nb] and nb not in enqueued:
                    queue.append(nb)
                    enqueued.add(nb)
        if len(members) >= max(min_support, 3):
            final = fit_plane(pts[members])
            segments.append(PlanarSegment(np.asarray(sorted(members)), final))
        else:
            assigned[np.asarray(members)] = False

    segments = _merge_compatible(segments, pts, angle_tol_deg, dist_tol)
    segments.sort(key=lambda s: (-s.support, int(s.indices[0])))
    return segments


def _merge_compatible(segments, pts, angle_tol_deg, dist_tol):
    """Fold small segments into larger coplanar-compatible ones.

    Crease bands between facets grow their own regions from blended
    normals; they sit within dist_tol of a real facet plane and vanish
    here. Genuinely distinct parallel planes stay apart because their
    offsets differ by more than dist_tol.
    """
    cos_tol = np.cos(np.radians(angle_tol_deg))
    changed = True
    while changed:
        changed = False
        segments.sort(key=lambda s: (-s.support, int(s.indices[0])))
        for si in range(len(segments) - 1, -1, -1):
            small = segments[si]
            best, best_med = None, None
            for bi in range(si):
                big = segments[bi]
                if abs(float(np.dot(small.plane.normal, big.plane.normal))) < cos_tol:
                    continue
                med = float(np.median(np.abs(big.plane.signed_distance(pts[small.indices]))))
                if med < dist_tol and (best_med is None or med < best_med):
                    best, best_med = bi, med
            if best is not None:
                big = segments[best]
                merged_idx = np.asarray(
                    sorted(set(big.indices.tolist()) | set(small.indices.tolist()))
                )
                segments[best] = PlanarSegment(merged_idx, fit_plane(pts[merged_idx]))
                segments.pop(si)
                changed = True
                break
    return segments


def classify_segments(segments, vertical_angle_tol_deg=10.0):
    """Split segments into roof and wall lists.

    A segment is a wall when its normal is within the tolerance of
    horizontal, i.e. |n_z| <= sin(tol); the boundary counts as vertical.
    """
    sin_tol = np.sin(np.radians(vertical_angle_tol_deg))
    roofs, walls = [], []
    for seg in segments:
        vertical = abs(float(seg.plane.normal[2])) <= sin_tol + 1e-12
        seg.vertical = vertical
        (walls if vertical else roofs).append(seg)
    return roofs, walls
