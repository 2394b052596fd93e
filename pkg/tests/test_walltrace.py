"""Polyline simplification, regularization and wall line extraction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanrecon.errors import OpenBoundary
from urbanrecon.geom import Polygon2, ring_area, seg_points_distance
from urbanrecon.walltrace import (
    assemble_outer_loop,
    extrude,
    regularize,
    simplify_contours,
)


def rect_pixels(w=10.0, h=8.0, spacing=0.2, jitter=0.0, rng=None):
    """Pixel-like samples along a rectangle boundary at (0,0)-(w,h)."""
    pts = []
    for x in np.arange(0, w, spacing):
        pts.append([x, 0.0])
        pts.append([w - x, h])
    for y in np.arange(0, h, spacing):
        pts.append([w, y])
        pts.append([0.0, h - y])
    pts = np.asarray(pts)
    if jitter and rng is not None:
        pts = pts + rng.uniform(-jitter, jitter, size=pts.shape)
    return pts


def polyline_segments(pls):
    segs = []
    for pl in pls:
        for i in range(len(pl) - 1):
            segs.append((pl[i], pl[i + 1]))
    return segs


def max_dist_to_polylines(points, pls):
    dmin = np.full(len(points), np.inf)
    for a, b in polyline_segments(pls):
        dmin = np.minimum(dmin, seg_points_distance(points, a, b))
    return float(dmin.max())


class TestSimplify:
    def test_rectangle_collapses_to_few_vertices(self):
        pixels = rect_pixels()
        pls, stats = simplify_contours(pixels, eps_d=0.25, eps_c=2.0)
        n_vertices = sum(len(pl) for pl in pls)
        assert n_vertices <= 20
        assert stats.collapses > len(pixels) * 0.8
        assert max_dist_to_polylines(pixels, pls) <= 0.25 + 1e-9

    def test_fit_tolerance_respected(self, rng):
        pixels = rect_pixels(jitter=0.05, rng=rng)
        pls, stats = simplify_contours(pixels, eps_d=0.25, eps_c=2.0)
        assert stats.hausdorff_retained <= 0.25 + 1e-9
        assert stats.cost_used <= 2.0 + 1e-9

    def test_tight_budget_limits_simplification(self):
        pixels = rect_pixels(jitter=0.04, rng=np.random.default_rng(5))
        _, loose = simplify_contours(pixels, eps_d=0.25, eps_c=2.0)
        _, tight = simplify_contours(pixels, eps_d=0.25, eps_c=0.01)
        assert tight.cost_used <= 0.01 + 1e-12
        assert tight.collapses < loose.collapses

    def test_collinear_pixels_become_single_segment(self):
        t = np.linspace(0, 9, 40)
        pixels = np.column_stack([t, 0.5 * t])
        pls, stats = simplify_contours(pixels)
        assert len(pls) == 1
        assert len(pls[0]) == 2
        assert stats.hausdorff_retained < 1e-9

    def test_small_groups_filtered(self):
        pixels = np.vstack([rect_pixels(), [[50, 50], [50.2, 50], [50.4, 50]]])
        pls, stats = simplify_contours(pixels, min_group=5)
        assert max_dist_to_polylines(rect_pixels(), pls) < 0.3
        far = np.array([[50.2, 50.0]])
        assert max_dist_to_polylines(far, pls) > 10
        assert stats.n_retained < stats.n_pixels
        assert stats.hausdorff_retained <= 0.25 + 1e-9

    def test_empty_and_tiny_inputs(self):
        pls, stats = simplify_contours(np.zeros((0, 2)))
        assert pls == [] and stats.n_pixels == 0
        pls, _ = simplify_contours(np.array([[1.0, 2.0], [3.0, 4.0]]), min_group=1)
        assert len(pls) == 1

    def test_deterministic(self, rng):
        pixels = rect_pixels(jitter=0.05, rng=rng)
        a, _ = simplify_contours(pixels)
        b, _ = simplify_contours(pixels)
        assert len(a) == len(b)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa, pb)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2000))
    def test_hausdorff_invariant_random_shapes(self, seed):
        rng = np.random.default_rng(seed)
        w = float(rng.uniform(5, 14))
        h = float(rng.uniform(4, 10))
        pixels = rect_pixels(w, h, jitter=0.06, rng=rng)
        pls, stats = simplify_contours(pixels, eps_d=0.25, eps_c=2.0)
        assert stats.hausdorff_retained <= 0.25 + 1e-9
        assert stats.cost_used <= 2.0 + 1e-9


class TestRegularize:
    def test_noisy_rectangle_squares_up(self, rng):
        # 28 jittered vertices around a rectangle: directions wobble
        # by a few degrees and must come back orthogonal
        corners = np.array([[0, 0], [12, 0], [12, 8], [0, 8]], dtype=float)
        ring = []
        for i in range(4):
            a, c = corners[i], corners[(i + 1) % 4]
            for t in np.linspace(0, 1, 8, endpoint=False):
                ring.append(a + t * (c - a))
        ring = np.asarray(ring) + rng.uniform(-0.08, 0.08, size=(len(ring), 2))
        closed = np.vstack([ring, ring[:1]])
        out = regularize([closed])
        assert len(out) == 1
        result = out[0]
        assert np.allclose(result[0], result[-1])
        body = result[:-1]
        assert len(body) <= 6
        dirs = []
        for i in range(len(body)):
            d = body[(i + 1) % len(body)] - body[i]
            dirs.append(float(np.arctan2(d[1], d[0]) % np.pi))
        uniq = sorted(set(round(t, 9) for t in dirs))
        assert len(uniq) == 2
        spread = abs(uniq[1] - uniq[0]) % np.pi
        assert min(spread, np.pi - spread) == pytest.approx(np.pi / 2, abs=1e-6)

    def test_footprint_direction_adopted(self):
        fp = Polygon2.create([[0, 0], [10, 0], [10, 6], [0, 6]])
        theta = np.radians(8.0)
        u = np.array([np.cos(theta), np.sin(theta)])
        pl = np.array([[1, 1], [1 + 6 * u[0], 1 + 6 * u[1]]])
        out = regularize([pl], footprint=fp)
        d = out[0][-1] - out[0][0]
        assert abs(np.arctan2(d[1], d[0])) < 1e-9   # snapped to the 0 deg edge

    def test_near_parallel_lines_merge_by_offset(self):
        a = np.array([[0.0, 0.0], [5.0, 0.0]])
        b = np.array([[6.0, 0.2], [11.0, 0.2]])
        out = regularize([a, b], offset_tol=0.3)
        ys = np.concatenate([pl[:, 1] for pl in out])
        assert np.allclose(ys, ys[0])
        assert ys[0] == pytest.approx(0.1, abs=1e-9)

    def test_distant_parallel_lines_stay_apart(self):
        a = np.array([[0.0, 0.0], [5.0, 0.0]])
        b = np.array([[0.0, 2.0], [5.0, 2.0]])
        out = regularize([a, b], offset_tol=0.3)
        ys = sorted(set(np.round(np.concatenate([pl[:, 1] for pl in out]), 6)))
        assert ys == [0.0, 2.0]

    def test_shallow_staircase_merges_to_one_line(self):
        # connected chain with small turns: midpoint rotation keeps the
        # offsets close enough that the whole run fuses into one line
        pl = np.array([[0.0, 0.0], [5.0, 0.05], [10.0, 1.0], [15.0, 1.05]])
        out = regularize([pl], offset_tol=0.3)
        assert len(out) == 1
        assert len(out[0]) == 2

    def test_jog_connects_parallel_snapped_lines(self):
        # both pieces snap to the horizontal footprint direction but
        # keep distinct offsets, so a perpendicular jog joins them
        fp = Polygon2.create([[0, 0], [20, 0], [20, 10], [0, 10]])
        pl = np.array([[0.0, 0.0], [10.0, 0.5], [16.0, 2.3]])
        out = regularize([pl], footprint=fp, offset_tol=0.3)
        assert len(out) == 1
        pts = out[0]
        assert len(pts) == 4
        ys = sorted(set(round(y, 6) for y in pts[:, 1]))
        assert ys == [0.25, 1.4]
        assert pts[1][0] == pytest.approx(pts[2][0])  # vertical connector

    def test_orthogonal_snapping_against_dominant(self):
        long_a = np.array([[0.0, 0.0], [20.0, 0.0]])
        theta = np.radians(95.0)
        v = np.array([np.cos(theta), np.sin(theta)])
        short_b = np.array([[0.0, 0.0], 4 * v])
        out = regularize([long_a, short_b])
        d = out[1][-1] - out[1][0]
        ang = np.arctan2(d[1], d[0]) % np.pi
        assert ang == pytest.approx(np.pi / 2, abs=1e-9)


class TestExtrude:
    def test_footprint_mode_suppresses_boundary_traces(self):
        fp = Polygon2.create([[0, 0], [10, 0], [10, 8], [0, 8]])
        boundary_trace = np.array(
            [[0.1, 0.1], [9.9, 0.12], [9.9, 7.9], [0.1, 7.9], [0.1, 0.1]]
        )
        step_trace = np.array([[5.0, 0.0], [5.0, 8.0]])
        ws = extrude([boundary_trace, step_trace], z_ground=0.0, footprint=fp,
                     resolution=0.2)
        outer = [l for l in ws.lines if l.outer]
        inner = [l for l in ws.lines if not l.outer]
        assert len(outer) == 4
        assert all(l.source == "footprint" for l in outer)
        assert len(inner) == 1
        assert inner[0].plane.normal[0] == pytest.approx(1.0)
        assert abs(inner[0].plane.d) == pytest.approx(5.0)

    def test_inferred_mode_builds_outer_loop(self):
        loop = np.array([[0, 0], [10, 0], [10, 8], [0, 8], [0, 0]], dtype=float)
        ws = extrude([loop], z_ground=0.0, footprint=None, resolution=0.2)
        assert ws.outer_loop.area == pytest.approx(80.0)
        assert len([l for l in ws.lines if l.outer]) == 4

    def test_inferred_mode_requires_closed_loop(self):
        open_pl = np.array([[0, 0], [10, 0], [10, 8]], dtype=float)
        with pytest.raises(OpenBoundary):
            extrude([open_pl], z_ground=0.0, footprint=None)

    def test_outer_loop_picks_largest_closed(self):
        small = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
        big = np.array([[0, 0], [10, 0], [10, 8], [0, 8], [0, 0]], dtype=float)
        loop = assemble_outer_loop([small, big])
        assert loop.area == pytest.approx(80.0)

    def test_collinear_intervals_merge_on_one_line(self):
        fp = Polygon2.create([[0, 0], [20, 0], [20, 8], [0, 8]])
        seg1 = np.array([[4.0, 4.0], [8.0, 4.0]])
        seg2 = np.array([[8.01, 4.0], [14.0, 4.0]])
        ws = extrude([seg1, seg2], z_ground=0.0, footprint=fp, resolution=0.2)
        inner = [l for l in ws.lines if not l.outer]
        assert len(inner) == 1
        assert len(inner[0].intervals) == 1
        t0, t1 = inner[0].intervals[0]
        assert t1 - t0 == pytest.approx(10.0, abs=0.05)


class TestEndToEndTrace:
    def test_twotier_step_line_recovered(self):
        from urbanrecon.heightfield import build_tin, detect_contours, morph_close, rasterize
        from urbanrecon.synth import SynthSpec, sample_building

        spec = SynthSpec(archetype="twotier", width=12.0, depth=8.0,
                         eave_z=4.0, ridge_z=7.0, density=40.0,
                         noise=0.02, ground_ring=True)
        xyz, _, truth = sample_building(spec, np.random.default_rng(11))
        hm = morph_close(
            rasterize(build_tin(xyz), 0.2,
                      bounds=(-2, -2, 14, 10), background=0.0),
            kernel=3,
        )
        cs = detect_contours(hm)
        pls, stats = simplify_contours(cs.pixels, eps_d=0.25, eps_c=2.0)
        assert stats.hausdorff_retained <= 0.25 + 1e-9
        reg = regularize(pls, footprint=truth.footprint)
        ws = extrude(reg, z_ground=0.0, footprint=truth.footprint, resolution=0.2)
        inner = [l for l in ws.lines if not l.outer]
        assert len(inner) >= 1
        step_x = truth.meta["step_x"]
        best = min(
            abs(abs(l.plane.d) - step_x)
            for l in inner
            if abs(l.plane.normal[0]) > 0.99
        )
        assert best < 0.3
