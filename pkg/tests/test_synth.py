"""Sampler sanity: points land on the declared planes, deterministically."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanrecon.errors import ConfigError
from urbanrecon.geom import points_in_polygon
from urbanrecon.synth import (
    ARCHETYPES,
    SynthSpec,
    archetype_truth,
    build_scene,
    sample_building,
)


class TestTruthGeometry:
    @pytest.mark.parametrize("arch", ARCHETYPES)
    def test_roof_faces_lie_on_their_planes(self, arch):
        spec = SynthSpec(archetype=arch, width=12.0, depth=8.0)
        truth = archetype_truth(spec)
        assert len(truth.roof_faces) == len(truth.roof_planes)
        for face, plane in zip(truth.roof_faces, truth.roof_planes):
            assert np.max(np.abs(plane.signed_distance(face))) < 1e-9

    def test_gable_planes_meet_at_ridge(self):
        spec = SynthSpec(archetype="gable", width=10, depth=8, eave_z=5, ridge_z=7)
        truth = archetype_truth(spec)
        ym = truth.meta["ridge_y"]
        for plane in truth.roof_planes:
            assert float(plane.z_at(3.0, ym)) == pytest.approx(7.0)

    def test_hip_needs_elongated_footprint(self):
        with pytest.raises(ConfigError):
            archetype_truth(SynthSpec(archetype="hip", width=8.0, depth=8.0))

    def test_unknown_archetype_rejected(self):
        with pytest.raises(ConfigError):
            SynthSpec(archetype="dome")


class TestSampling:
    def test_noiseless_points_sit_on_planes(self):
        spec = SynthSpec(archetype="gable", density=30.0)
        xyz, seg, truth = sample_building(spec, np.random.default_rng(3))
        for si, plane in enumerate(truth.roof_planes):
            pts = xyz[seg == si]
            assert len(pts) > 100
            assert np.max(np.abs(plane.signed_distance(pts))) < 1e-9

    def test_point_count_tracks_density(self):
        lo = sample_building(SynthSpec(density=10.0), np.random.default_rng(0))[0]
        hi = sample_building(SynthSpec(density=40.0), np.random.default_rng(0))[0]
        assert len(hi) == pytest.approx(4 * len(lo), rel=0.05)

    def test_noise_moves_points_off_plane(self):
        spec = SynthSpec(archetype="flat", noise=0.03, density=50.0)
        xyz, seg, truth = sample_building(spec, np.random.default_rng(1))
        resid = truth.roof_planes[0].signed_distance(xyz[seg == 0])
        assert 0.02 < np.std(resid) < 0.04

    def test_ground_ring_outside_footprint_at_ground_z(self):
        spec = SynthSpec(archetype="flat", ground_ring=True, ground_z=1.5)
        xyz, seg, truth = sample_building(spec, np.random.default_rng(2))
        ground = xyz[seg == -1]
        assert len(ground) >= 50
        assert np.all(ground[:, 2] == 1.5)
        assert np.all(points_in_polygon(ground[:, :2], truth.footprint) == 0)

    def test_outliers_labeled_negative(self):
        spec = SynthSpec(archetype="flat", outlier_fraction=0.05)
        xyz, seg, truth = sample_building(spec, np.random.default_rng(4))
        n_out = int(np.count_nonzero(seg == -1))
        assert n_out == pytest.approx(0.05 * np.count_nonzero(seg >= 0), abs=2)

    @settings(max_examples=20, deadline=None)
    @given(
        arch=st.sampled_from(ARCHETYPES),
        seed=st.integers(0, 1000),
    )
    def test_deterministic_given_seed(self, arch, seed):
        spec = SynthSpec(archetype=arch, width=12.0, depth=8.0, noise=0.02,
                         outlier_fraction=0.02, ground_ring=True)
        a = sample_building(spec, np.random.default_rng(seed))[0]
        b = sample_building(spec, np.random.default_rng(seed))[0]
        assert np.array_equal(a, b)

    def test_plan_projection_stays_inside_footprint(self):
        for arch in ("flat", "gable", "hip", "lshape", "twotier"):
            spec = SynthSpec(archetype=arch, width=14.0, depth=8.0)
            xyz, seg, truth = sample_building(spec, np.random.default_rng(5))
            roof = xyz[seg >= 0]
            assert np.all(points_in_polygon(roof[:, :2], truth.footprint) != 0)


class TestScene:
    def test_instance_labels_and_footprints(self):
        specs = [
            SynthSpec(archetype="flat", origin=(0, 0)),
            SynthSpec(archetype="gable", origin=(30, 0)),
        ]
        cloud, fps, truths = build_scene(specs, seed=9)
        assert [f.id for f in fps] == ["0", "1"]
        assert set(np.unique(cloud.labels)) == {0, 1}
        for bi, truth in enumerate(truths):
            pts = cloud.xyz[cloud.labels == bi]
            assert np.all(points_in_polygon(pts[:, :2], truth.footprint) != 0)

    def test_overhang_has_double_layer(self):
        spec = SynthSpec(archetype="overhang", width=10.0, depth=8.0,
                         eave_z=4.0, ridge_z=7.0)
        xyz, seg, truth = sample_building(spec, np.random.default_rng(6))
        lo, hi = truth.meta["occluded_from"], truth.meta["slab_edge_x"]
        strip = xyz[(xyz[:, 0] > lo) & (xyz[:, 0] < hi)]
        assert {4.0, 7.0} <= set(np.round(strip[:, 2], 6))
