"""I/O round trips, strict parsing errors and scene partitioning."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanrecon.errors import ParseError, UnsupportedFormat
from urbanrecon.ingest import (
    Footprint,
    PointCloud,
    estimate_ground_z,
    parse_wkt_polygons,
    read_footprints,
    read_points,
    read_xyz,
    split_by_footprints,
    split_by_instance_labels,
    write_ply,
)
from urbanrecon.geom import Polygon2


class TestXyz:
    def test_round_numbers(self, tmp_path):
        p = tmp_path / "pts.xyz"
        p.write_text("0 0 1\n1.5 -2 3.25\n\n4 5 6\n")
        arr = read_xyz(p)
        assert arr.shape == (3, 3)
        assert arr[1, 2] == 3.25

    def test_wrong_column_count_reports_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("1 2 3\n4 5\n")
        with pytest.raises(ParseError, match="line 2"):
            read_xyz(p)

    def test_non_numeric_reports_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("1 2 3\n1 2 x\n")
        with pytest.raises(ParseError, match="line 2"):
            read_xyz(p)

    def test_empty_file_gives_empty_array(self, tmp_path):
        p = tmp_path / "empty.xyz"
        p.write_text("")
        assert read_xyz(p).shape == (0, 3)


class TestPly:
    def test_binary_round_trip_bit_exact(self, tmp_path, rng):
        xyz = rng.uniform(-1000, 1000, size=(257, 3))
        normals = rng.normal(size=(257, 3))
        labels = rng.integers(-1, 40, size=257).astype(np.int32)
        cloud = PointCloud(xyz, normals, labels)
        p = tmp_path / "c.ply"
        write_ply(p, cloud, binary=True)
        back = read_points(p)
        assert np.array_equal(back.xyz, cloud.xyz)
        assert np.array_equal(back.normals, cloud.normals)
        assert np.array_equal(back.labels, cloud.labels)

    def test_ascii_round_trip_bit_exact(self, tmp_path, rng):
        cloud = PointCloud(rng.uniform(-10, 10, size=(31, 3)))
        p = tmp_path / "c.ply"
        write_ply(p, cloud, binary=False)
        back = read_points(p)
        assert np.array_equal(back.xyz, cloud.xyz)
        assert back.normals is None and back.labels is None

    def test_unknown_properties_skipped(self, tmp_path):
        header = (
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\nend_header\n"
        )
        p = tmp_path / "extra.ply"
        p.write_text(header + "0 0 1 255\n2 3 4 10\n")
        cloud = read_points(p)
        assert cloud.xyz.shape == (2, 3)
        assert cloud.xyz[1, 1] == 3.0

    def test_float32_coordinates_accepted(self, tmp_path):
        vals = np.array([[1.5, 2.5, 3.5]], dtype="<f4")
        header = (
            "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
        )
        p = tmp_path / "f32.ply"
        with open(p, "wb") as fh:
            fh.write(header.encode())
            fh.write(vals.tobytes())
        cloud = read_points(p)
        assert np.allclose(cloud.xyz, [[1.5, 2.5, 3.5]])

    def test_big_endian_rejected(self, tmp_path):
        p = tmp_path / "be.ply"
        p.write_text("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n")
        with pytest.raises(UnsupportedFormat):
            read_points(p)

    def test_truncated_binary_rejected(self, tmp_path):
        header = (
            "ply\nformat binary_little_endian 1.0\nelement vertex 5\n"
            "property double x\nproperty double y\nproperty double z\nend_header\n"
        )
        p = tmp_path / "trunc.ply"
        with open(p, "wb") as fh:
            fh.write(header.encode())
            fh.write(b"\x00" * 24)  # one point instead of five
        with pytest.raises(ParseError, match="truncated"):
            read_points(p)

    def test_unknown_extension(self, tmp_path):
        p = tmp_path / "pts.las"
        p.write_text("")
        with pytest.raises(UnsupportedFormat):
            read_points(p)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), binary=st.booleans())
    def test_round_trip_property(self, tmp_path_factory, seed, binary):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 50))
        cloud = PointCloud(
            rng.normal(scale=500, size=(n, 3)),
            labels=rng.integers(-1, 5, size=n).astype(np.int32),
        )
        p = tmp_path_factory.mktemp("ply") / "c.ply"
        write_ply(p, cloud, binary=binary)
        back = read_points(p)
        assert np.array_equal(back.xyz, cloud.xyz)
        assert np.array_equal(back.labels, cloud.labels)


SQUARE = [[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]]


class TestFootprints:
    def test_geojson_polygon_and_multipolygon(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"id": "a"},
                    "geometry": {"type": "Polygon", "coordinates": [SQUARE]},
                },
                {
                    "type": "Feature",
                    "properties": {"id": "b"},
                    "geometry": {
                        "type": "MultiPolygon",
                        "coordinates": [
                            [[[20, 0], [25, 0], [25, 5], [20, 5], [20, 0]]],
                            [[[30, 0], [35, 0], [35, 5], [30, 5], [30, 0]]],
                        ],
                    },
                },
            ],
        }
        p = tmp_path / "fp.geojson"
        p.write_text(json.dumps(doc))
        fps = read_footprints(p)
        assert [fp.id for fp in fps] == ["a", "b_0", "b_1"]
        assert fps[0].polygon.area == pytest.approx(100.0)

    def test_duplicate_ids_rejected(self, tmp_path):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {"type": "Feature", "properties": {"id": "a"},
                 "geometry": {"type": "Polygon", "coordinates": [SQUARE]}},
                {"type": "Feature", "properties": {"id": "a"},
                 "geometry": {"type": "Polygon", "coordinates": [SQUARE]}},
            ],
        }
        p = tmp_path / "dup.geojson"
        p.write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="duplicate"):
            read_footprints(p)

    def test_wkt_lines(self, tmp_path):
        p = tmp_path / "fp.wkt"
        p.write_text(
            "b1;POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))\n"
            "b2;MULTIPOLYGON (((10 0, 12 0, 12 2, 10 2, 10 0)),"
            "((20 0, 22 0, 22 2, 20 2, 20 0)))\n"
        )
        fps = read_footprints(p)
        assert [fp.id for fp in fps] == ["b1", "b2_0", "b2_1"]
        assert fps[1].polygon.area == pytest.approx(4.0)

    def test_wkt_polygon_with_hole(self):
        rings = parse_wkt_polygons(
            "POLYGON ((0 0, 10 0, 10 10, 0 10, 0 0), (4 4, 6 4, 6 6, 4 6, 4 4))"
        )
        assert len(rings) == 1 and len(rings[0]) == 2

    def test_wkt_parse_error_reports_line(self, tmp_path):
        p = tmp_path / "bad.wkt"
        p.write_text("b1;POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))\nb2;CIRCLE (1 2 3)\n")
        with pytest.raises(ParseError, match="line 2"):
            read_footprints(p)


def make_fp(fid, origin, size=10.0):
    o = np.asarray(origin, dtype=float)
    ring = o + size * np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    return Footprint(fid, Polygon2.create(ring))


class TestPartitioning:
    def test_points_go_to_containing_footprint(self, rng):
        fps = [make_fp("a", (0, 0)), make_fp("b", (20, 0))]
        pts_a = np.column_stack([rng.uniform(1, 9, (50, 2)), np.full(50, 5.0)])
        pts_b = np.column_stack(
            [rng.uniform(21, 29, 40), rng.uniform(1, 9, 40), np.full(40, 7.0)]
        )
        stray = np.array([[100.0, 100.0, 1.0]])
        xyz = np.vstack([pts_a, pts_b, stray])
        assignments, skipped = split_by_footprints(xyz, fps)
        assert len(assignments["a"]) == 50
        assert len(assignments["b"]) == 40
        assert not skipped

    def test_shared_boundary_goes_to_first_in_file(self):
        fps = [make_fp("left", (0, 0)), make_fp("right", (10, 0))]
        on_edge = np.array([[10.0, 5.0, 3.0]])
        bulk_l = np.column_stack([np.full(40, 5.0), np.linspace(1, 9, 40), np.ones(40)])
        bulk_r = np.column_stack([np.full(40, 15.0), np.linspace(1, 9, 40), np.ones(40)])
        xyz = np.vstack([on_edge, bulk_l, bulk_r])
        assignments, _ = split_by_footprints(xyz, fps, min_points=10)
        assert 0 in assignments["left"]
        assert 0 not in assignments["right"]

    def test_sparse_footprint_skipped(self):
        fps = [make_fp("tiny", (0, 0))]
        xyz = np.array([[5.0, 5.0, 2.0], [6.0, 6.0, 2.0]])
        assignments, skipped = split_by_footprints(xyz, fps, min_points=30)
        assert assignments == {}
        assert skipped == {"tiny": 2}

    def test_split_by_instance_labels(self):
        labels = np.array([0] * 40 + [1] * 35 + [-1] * 5 + [2] * 3)
        assignments, skipped = split_by_instance_labels(labels)
        assert set(assignments) == {"0", "1"}
        assert skipped == {"2": 3}
        assert len(assignments["0"]) == 40


class TestGroundEstimation:
    def test_collar_percentile(self, rng):
        poly = Polygon2.create(10 * np.array([[0, 0], [1, 0], [1, 1], [0, 1]]))
        inside = np.column_stack([rng.uniform(1, 9, (200, 2)), np.full(200, 8.0)])
        t = rng.uniform(0, 10, 150)
        ring = np.column_stack([t, np.full(150, -1.0), rng.normal(0.5, 0.05, 150)])
        scene = np.vstack([inside, ring])
        z = estimate_ground_z(scene, poly)
        assert 0.3 < z < 0.7

    def test_fallback_to_own_points(self, rng):
        poly = Polygon2.create(10 * np.array([[0, 0], [1, 0], [1, 1], [0, 1]]))
        inside = np.column_stack(
            [rng.uniform(1, 9, (100, 2)), rng.uniform(5.0, 5.2, 100)]
        )
        z = estimate_ground_z(inside, poly)
        assert 5.0 <= z <= 5.2
