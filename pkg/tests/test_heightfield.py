"""Heightmap construction and contour detection in physical units."""

import numpy as np
import pytest

from urbanrecon.errors import DegenerateInput, TooFewPoints
from urbanrecon.geom import Polygon2, seg_points_distance
from urbanrecon.heightfield import (
    Heightmap,
    build_tin,
    detect_contours,
    morph_close,
    rasterize,
)
from urbanrecon.synth import SynthSpec, sample_building


def flat_grid_heightmap(size=40, plateau=5.0, lo=8, hi=32, resolution=0.25):
    z = np.zeros((size, size))
    z[lo:hi, lo:hi] = plateau
    valid = np.ones((size, size), dtype=bool)
    return Heightmap(z, valid, (0.0, 0.0), resolution, background=0.0)


class TestTin:
    def test_planar_interpolation_is_exact(self):
        spec = SynthSpec(archetype="gable", density=30.0)
        xyz, _, truth = sample_building(spec, np.random.default_rng(0))
        tin = build_tin(xyz)
        hm = rasterize(tin, 0.2, footprint=truth.footprint)
        xs, ys = hm.pixel_centers()
        gx, gy = np.meshgrid(xs, ys)
        best = np.full(hm.shape, np.inf)
        for plane in truth.roof_planes:
            expect = np.asarray(plane.z_at(gx, gy))
            best = np.minimum(best, np.abs(hm.z - expect))
        # triangles straddling the ridge blend the planes; away from the
        # crease the linear interpolation must reproduce the facet exactly
        away = hm.valid & (np.abs(gy - truth.meta["ridge_y"]) > 0.5)
        assert np.count_nonzero(away) > 500
        assert np.max(best[away]) < 1e-9

    def test_duplicate_plan_position_keeps_max_z(self):
        xyz = np.array(
            [[0, 0, 1.0], [0, 0, 9.0], [4, 0, 1.0], [0, 4, 1.0], [4, 4, 1.0]]
        )
        tin = build_tin(xyz)
        hm = rasterize(tin, 1.0, bounds=(0, 0, 4, 4), pad=0)
        # the corner pixel interpolates from the z=9 sample, not z=1
        assert hm.z[hm.valid].max() > 5.0

    def test_collinear_points_rejected(self):
        t = np.linspace(0, 5, 30)
        xyz = np.column_stack([t, 2 * t, np.ones_like(t)])
        with pytest.raises(DegenerateInput):
            build_tin(xyz)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            build_tin(np.zeros((2, 3)))


class TestRasterize:
    def test_grid_geometry(self):
        xyz = np.array([[0, 0, 2.0], [10, 0, 2.0], [10, 8, 2.0], [0, 8, 2.0]])
        tin = build_tin(xyz)
        hm = rasterize(tin, 0.5, bounds=(0, 0, 10, 8), pad=2)
        assert hm.shape == (20, 24)
        assert hm.origin == (-1.0, -1.0)
        xs, ys = hm.pixel_centers()
        assert xs[0] == pytest.approx(-0.75)
        assert ys[-1] == pytest.approx(-1.0 + (20 - 0.5) * 0.5)

    def test_footprint_masks_validity(self):
        rng = np.random.default_rng(1)
        xy = rng.uniform(0, 20, size=(500, 2))
        xyz = np.column_stack([xy, np.full(500, 3.0)])
        fp = Polygon2.create([[5, 5], [15, 5], [15, 15], [5, 15]])
        hm = rasterize(build_tin(xyz), 0.5, footprint=fp)
        xs, ys = hm.pixel_centers()
        gx, gy = np.meshgrid(xs, ys)
        outside = (gx < 5) | (gx > 15) | (gy < 5) | (gy > 15)
        assert not np.any(hm.valid & outside)
        assert np.count_nonzero(hm.valid) > 300


class TestMorphClose:
    def test_fills_validity_pinhole(self):
        hm = flat_grid_heightmap()
        hm.valid[20, 20] = False
        out = morph_close(hm, kernel=3)
        assert out.valid[20, 20]
        assert out.z[20, 20] == pytest.approx(5.0)

    def test_removes_single_pixel_pit(self):
        hm = flat_grid_heightmap()
        hm.z[20, 20] = 1.0
        out = morph_close(hm, kernel=3)
        assert out.z[20, 20] == pytest.approx(5.0)

    def test_preserves_plateau_and_mask_elsewhere(self):
        hm = flat_grid_heightmap()
        out = morph_close(hm, kernel=3)
        assert np.array_equal(out.valid, hm.valid)
        assert np.allclose(out.z, hm.z)

    def test_does_not_fill_large_hole(self):
        hm = flat_grid_heightmap()
        hm.valid[14:26, 14:26] = False
        out = morph_close(hm, kernel=3)
        assert not out.valid[20, 20]


class TestContours:
    def test_step_edge_found_near_true_boundary(self):
        hm = flat_grid_heightmap(plateau=5.0)
        cs = detect_contours(hm)
        assert len(cs.pixels) > 20
        edges = [
            (np.array([2.0, 2.0]), np.array([8.0, 2.0])),
            (np.array([8.0, 2.0]), np.array([8.0, 8.0])),
            (np.array([8.0, 8.0]), np.array([2.0, 8.0])),
            (np.array([2.0, 8.0]), np.array([2.0, 2.0])),
        ]
        dmin = np.full(len(cs.pixels), np.inf)
        for a, b in edges:
            dmin = np.minimum(dmin, seg_points_distance(cs.pixels, a, b))
        assert np.max(dmin) < 2.5 * hm.resolution

    def test_magnitude_tracks_step_height(self):
        hm = flat_grid_heightmap(plateau=2.0)
        cs = detect_contours(hm, low=0.05, high=0.2)
        peak = cs.magnitudes.max()
        assert 0.75 * 2.0 < peak < 1.25 * 2.0

    def test_small_step_suppressed_by_high_threshold(self):
        hm = flat_grid_heightmap(plateau=0.6)   # below the 0.8 m detail scale
        cs = detect_contours(hm, low=0.3, high=0.8)
        assert len(cs.pixels) == 0

    def test_meter_scale_step_passes_high_threshold(self):
        hm = flat_grid_heightmap(plateau=1.0)
        cs = detect_contours(hm, low=0.3, high=0.8)
        assert len(cs.pixels) > 20

    def test_weak_pixels_survive_when_touching_strong(self):
        # plateau with a height ramp along one edge: the tall side is
        # strong, the low side weak, both in one connected contour
        size = 40
        z = np.zeros((size, size))
        heights = np.linspace(0.4, 6.0, 24)
        z[8:32, 8:32] = heights[None, :]
        hm = Heightmap(z, np.ones_like(z, dtype=bool), (0, 0), 0.25, background=0.0)
        cs = detect_contours(hm)
        assert len(cs.pixels) > 0
        cols = cs.indices[:, 1]
        assert cols.min() < 12          # weak low-side columns retained

    def test_isolated_weak_group_dropped(self):
        size = 40
        z = np.zeros((size, size))
        z[8:32, 8:20] = 6.0             # strong plateau
        z[10:14, 30:34] = 0.5           # weak isolated bump, far away
        hm = Heightmap(z, np.ones_like(z, dtype=bool), (0, 0), 0.25, background=0.0)
        cs = detect_contours(hm)
        assert len(cs.pixels) > 0
        assert np.all(cs.indices[:, 1] < 28)


class TestFullChain:
    def test_flat_building_contour_hugs_footprint(self):
        spec = SynthSpec(archetype="flat", density=40.0, ground_ring=True)
        xyz, _, truth = sample_building(spec, np.random.default_rng(3))
        tin = build_tin(xyz)
        hm = rasterize(tin, 0.2, bounds=(-2, -2, 12, 10), background=0.0)
        hm = morph_close(hm, kernel=3)
        cs = detect_contours(hm)
        assert len(cs.pixels) > 50
        dmin = np.full(len(cs.pixels), np.inf)
        ring = truth.footprint.outer
        for i in range(len(ring)):
            a, b = ring[i], ring[(i + 1) % len(ring)]
            dmin = np.minimum(dmin, seg_points_distance(cs.pixels, a, b))
        assert np.max(dmin) < 3 * hm.resolution
        assert np.median(dmin) < 1.5 * hm.resolution
