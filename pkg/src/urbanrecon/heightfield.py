"""Roof height rasterization and step-edge detection.

The building cloud becomes a TIN, the TIN becomes a regular heightmap,
small gaps are closed morphologically, and height discontinuities are
picked up by a Canny detector whose gradient magnitudes carry physical
units (meters of height change per pixel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay, QhullError

from .errors import DegenerateInput, TooFewPixels, TooFewPoints
from .geom import Polygon2, points_in_polygon


@dataclass
class Tin:
    """Delaunay triangulation of the plan projection with heights."""

    delaunay: Delaunay
    z: np.ndarray


@dataclass
class Heightmap:
    """Row-major grid; pixel (row j, col i) has center
    ``origin + ((i + 0.5) r, (j + 0.5) r)``."""

    z: np.ndarray
    valid: np.ndarray
    origin: tuple
    resolution: float
    background: float | None = None

    @property
    def shape(self):
        return self.z.shape

    def pixel_centers(self):
        h, w = self.z.shape
        xs = self.origin[0] + (np.arange(w) + 0.5) * self.resolution
        ys = self.origin[1] + (np.arange(h) + 0.5) * self.resolution
        return xs, ys

    def filled(self) -> np.ndarray:
        if self.background is not None:
            fill = self.background
        elif np.any(self.valid):
            fill = float(self.z[self.valid].min())
        else:
            fill = 0.0
        return np.where(self.valid, self.z, fill)


def build_tin(xyz) -> Tin:
    """Triangulate the plan projection; coincident plan positions keep
    their maximum height (upper surface wins, as seen from above)."""
    pts = np.asarray(xyz, dtype=float)
    if len(pts) < 3:
        raise TooFewPoints("TIN needs at least 3 points")
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    spts = pts[order]
    key = np.round(spts[:, :2], 9)
    last = np.ones(len(spts), dtype=bool)
    same = np.all(key[1:] == key[:-1], axis=1)
    last[:-1] = ~same
    dedup = spts[last]
    if len(dedup) < 3:
        raise DegenerateInput("all points share a plan position")
    try:
        tri = Delaunay(dedup[:, :2])
    except QhullError:
        raise DegenerateInput("plan positions are collinear")
    return Tin(tri, dedup[:, 2])


def rasterize(
    tin: Tin,
    resolution: float,
    footprint: Polygon2 | None = None,
    bounds=None,
    pad=2,
    background=None,
) -> Heightmap:
    """Sample the TIN on a regular grid.

    The grid covers ``bounds`` (or the footprint, or the TIN extent)
    plus ``pad`` pixels on each side. Pixels outside the triangulation,
    or outside the footprint when one is given, are invalid.
    """
    if resolution <= 0:
        raise DegenerateInput("resolution must be positive")
    if bounds is None:
        if footprint is not None:
            bounds = footprint.bounds()
        else:
            p = tin.delaunay.points
            bounds = (p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max())
    x0, y0, x1, y1 = bounds
    origin = (x0 - pad * resolution, y0 - pad * resolution)
    w = int(np.ceil((x1 - x0) / resolution)) + 2 * pad
    h = int(np.ceil((y1 - y0) / resolution)) + 2 * pad
    if w < 3 or h < 3:
        raise TooFewPixels(f"grid {h}x{w} too small at resolution {resolution}")
    xs = origin[0] + (np.arange(w) + 0.5) * resolution
    ys = origin[1] + (np.arange(h) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    centers = np.column_stack([gx.ravel(), gy.ravel()])

    simplex = tin.delaunay.find_simplex(centers)
    inside = simplex >= 0
    z = np.zeros(len(centers))
    if np.any(inside):
        s = simplex[inside]
        transform = tin.delaunay.transform[s]
        bary2 = np.einsum(
            "nij,nj->ni", transform[:, :2, :], centers[inside] - transform[:, 2, :]
        )
        bary = np.column_stack([bary2, 1.0 - bary2.sum(axis=1)])
        verts = tin.delaunay.simplices[s]
        z[inside] = np.einsum("ni,ni->n", bary, tin.z[verts])

    valid = inside.copy()
    if footprint is not None:
        valid &= points_in_polygon(centers, footprint) != 0
    return Heightmap(
        z.reshape(h, w), valid.reshape(h, w), origin, resolution, background=background
    )


def morph_close(hm: Heightmap, kernel=3) -> Heightmap:
    """Grey-level closing of the height surface and of the valid mask.

    Fills pits and validity holes up to the kernel size; large plateaus
    pass through unchanged.
    """
    if kernel < 1:
        return hm
    foot = np.ones((kernel, kernel), dtype=bool)
    zin = np.where(hm.valid, hm.z, -np.inf)
    dil = ndimage.grey_dilation(zin, footprint=foot, mode="constant", cval=-np.inf)
    clo = ndimage.grey_erosion(dil, footprint=foot, mode="constant", cval=np.inf)
    vmask = ndimage.binary_erosion(
        ndimage.binary_dilation(hm.valid, structure=foot),
        structure=foot,
        border_value=1,
    )
    zout = np.where(vmask, clo, 0.0)
    zout[~np.isfinite(zout)] = 0.0
    vmask &= np.isfinite(clo)
    return Heightmap(zout, vmask, hm.origin, hm.resolution, background=hm.background)


@dataclass
class ContourSet:
    """Canny output: retained pixel centers with their gradient data."""

    pixels: np.ndarray          # (m, 2) metric pixel-center coordinates
    magnitudes: np.ndarray      # meters per pixel
    indices: np.ndarray         # (m, 2) row, col into the heightmap
    shape: tuple


def detect_contours(hm: Heightmap, low=0.3, high=0.8, sigma=1.0) -> ContourSet:
    """Canny step-edge detection on the filled height image.

    Magnitudes are calibrated so an isolated sharp step of ``s`` meters
    peaks at about ``s``: Sobel slope estimates are scaled by the
    smoothing kernel's peak attenuation ``sigma * sqrt(2 pi)``.  The
    (low, high) thresholds therefore read as wall heights in meters.
    Weak pixels survive only when 8-connected to a strong pixel.
    """
    img = ndimage.gaussian_filter(hm.filled(), sigma=sigma, mode="nearest")
    gx = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    mag = np.hypot(gx, gy) * (sigma * np.sqrt(2.0 * np.pi))

    # non-maximum suppression along the quantized gradient direction
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = ((angle + np.pi / 8) // (np.pi / 4)).astype(int) % 4
    padded = np.pad(mag, 1, mode="constant")
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    nms = np.zeros_like(mag)
    for sec, (dj, di) in offsets.items():
        sel = sector == sec
        fwd = padded[1 + dj : 1 + dj + mag.shape[0], 1 + di : 1 + di + mag.shape[1]]
        bwd = padded[1 - dj : 1 - dj + mag.shape[0], 1 - di : 1 - di + mag.shape[1]]
        # strict on one side so a tied plateau thins to a single line
        keep = sel & (mag > fwd) & (mag >= bwd)
        nms[keep] = mag[keep]

    weak = nms >= low
    strong = nms >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n:
        strong_labels = np.unique(labels[strong])
        strong_labels = strong_labels[strong_labels > 0]
        keep_mask = np.isin(labels, strong_labels) & weak
    else:
        keep_mask = np.zeros_like(weak)

    jj, ii = np.nonzero(keep_mask)
    xs = hm.origin[0] + (ii + 0.5) * hm.resolution
    ys = hm.origin[1] + (jj + 0.5) * hm.resolution
    return ContourSet(
        pixels=np.column_stack([xs, ys]),
        magnitudes=nms[jj, ii],
        indices=np.column_stack([jj, ii]),
        shape=hm.shape,
    )
