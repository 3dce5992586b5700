"""Label-pipeline tests: warping, aggregation, RANSAC, masking."""

import math

import numpy as np
import pytest

from conftest import CAM, make_box, oracle_footprint_mask, simple_scene, tilted_pose

from footprints.geometry import Intrinsics, Plane, Pose, relative_pose
from footprints.labels import (
    LabelParams,
    PlaneFitError,
    RansacParams,
    TrainingTarget,
    WarpedDepthSet,
    aggregate_traversable,
    build_training_target,
    fit_ground_plane,
    forward_warp,
    induced_flow,
    median_hidden_depth,
    moving_object_mask,
    untraversable_from_depth,
    warp_sources,
)
from footprints.scene import (
    FrameRender,
    ground_truth_flow,
    ground_truth_hidden,
    render_frame,
)


def warped(*maps):
    return WarpedDepthSet(np.stack([np.asarray(m, dtype=np.float64) for m in maps]),
                          tuple(range(len(maps))))


class TestForwardWarp:
    def test_identity_reproduces_masked_depth(self):
        scene = simple_scene(make_box(0.5, 5.0, 0.5, 0.5, 0.5))
        render = render_frame(scene, CAM, tilted_pose())
        out = forward_warp(render, Pose.identity(), CAM)
        np.testing.assert_array_equal(out, render.depth * render.ground_mask)

    def test_translation_matches_scalar_reference(self):
        # Independent scalar-loop warp: backproject, shift by t_x in camera
        # coordinates, project, round, keep the min depth per target pixel.
        scene = simple_scene(make_box(-1.0, 6.0, 0.4, 0.4, 0.4))
        render = render_frame(scene, CAM, tilted_pose())
        t_x = 0.3
        rel = Pose(np.eye(3), np.array([t_x, 0.0, 0.0]))
        out = forward_warp(render, rel, CAM)

        expected = np.full(render.depth.shape, np.inf)
        for v in range(CAM.height):
            for u in range(CAM.width):
                if render.ground_mask[v, u] != 1:
                    continue
                d = render.depth[v, u]
                x = (u - CAM.cx) / CAM.fx * d + t_x
                y = (v - CAM.cy) / CAM.fy * d
                uu = int(round(CAM.fx * x / d + CAM.cx))
                vv = int(round(CAM.fy * y / d + CAM.cy))
                if 0 <= uu < CAM.width and 0 <= vv < CAM.height:
                    expected[vv, uu] = min(expected[vv, uu], d)
        expected[np.isinf(expected)] = 0.0
        np.testing.assert_array_equal(out, expected)
        # Pixel shift is fx * t_x / z for the planar ground.
        v, u = np.argwhere(out > 0)[0]
        assert abs(CAM.fx * t_x / out[v, u]) < CAM.width

    def test_zbuffer_keeps_minimum_depth(self):
        src_k = Intrinsics(fx=10.0, fy=10.0, cx=0.5, cy=0.0, width=2, height=1)
        tgt_k = Intrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=1, height=1)
        source = FrameRender(np.array([[2.0, 5.0]]), np.array([[1, 1]]), src_k,
                             Pose.identity())
        out = forward_warp(source, Pose.identity(), tgt_k)
        # Both source pixels land on the single target pixel; 2.0 < 5.0 wins.
        assert out.shape == (1, 1)
        assert out[0, 0] == 2.0

    def test_empty_source_gives_zeros(self):
        src_k = Intrinsics(fx=10.0, fy=10.0, cx=0.5, cy=0.5, width=2, height=2)
        source = FrameRender(np.zeros((2, 2)), np.zeros((2, 2)), src_k, Pose.identity())
        out = forward_warp(source, Pose.identity(), CAM)
        assert out.shape == (CAM.height, CAM.width)
        assert not out.any()


class TestAggregateTraversable:
    def test_strictly_greater_than_k(self):
        maps = warped([[1.0]], [[2.0]], [[3.0]], [[0.0]], [[0.0]])
        assert aggregate_traversable(maps, 2)[0, 0] == 1  # 3 maps > 2
        maps = warped([[1.0]], [[2.0]], [[0.0]], [[0.0]], [[0.0]])
        assert aggregate_traversable(maps, 2)[0, 0] == 0  # 2 maps, not > 2

    def test_k_zero_single_map_support(self):
        maps = warped([[0.0, 1.5], [2.0, 0.0]])
        np.testing.assert_array_equal(aggregate_traversable(maps, 0),
                                      [[0, 1], [1, 0]])

    def test_monotone_in_k_property(self):
        rng = np.random.default_rng(9)
        stack = rng.uniform(0, 1, size=(6, 8, 8))
        stack[stack < 0.5] = 0.0
        maps = WarpedDepthSet(stack, tuple(range(6)))
        previous = aggregate_traversable(maps, 0)
        for k in range(1, 7):
            current = aggregate_traversable(maps, k)
            assert np.all(current <= previous)
            previous = current


class TestMedianHiddenDepth:
    def test_ignores_zeros_odd_count(self):
        maps = warped([[2.0]], [[2.1]], [[0.0]], [[2.3]])
        assert median_hidden_depth(maps)[0, 0] == pytest.approx(2.1)

    def test_even_count_mean_of_middle(self):
        maps = warped([[2.0]], [[4.0]])
        assert median_hidden_depth(maps)[0, 0] == pytest.approx(3.0)

    def test_all_zero_stays_zero(self):
        maps = warped([[0.0]], [[0.0]])
        assert median_hidden_depth(maps)[0, 0] == 0.0

    def test_bounded_by_positive_values_property(self):
        rng = np.random.default_rng(10)
        stack = rng.uniform(0, 5, size=(7, 12, 12))
        stack[rng.uniform(size=stack.shape) < 0.4] = 0.0
        maps = WarpedDepthSet(stack, tuple(range(7)))
        med = median_hidden_depth(maps)
        positive = np.where(stack > 0, stack, np.nan)
        with np.errstate(invalid="ignore"):
            lo = np.nanmin(positive, axis=0)
            hi = np.nanmax(positive, axis=0)
        has = (stack > 0).any(axis=0)
        assert np.all(med[has] >= lo[has] - 1e-12)
        assert np.all(med[has] <= hi[has] + 1e-12)
        assert np.all(med[~has] == 0)


def camera_frame_ground_plane(pose):
    """The true ground plane expressed in camera coordinates."""
    normal = pose.rotation.T @ np.array([0.0, 1.0, 0.0])
    offset = float(pose.translation[1])
    return Plane(normal, offset)


class TestFitGroundPlane:
    def test_noiseless_recovery(self):
        pose = tilted_pose()
        render = render_frame(simple_scene(), CAM, pose)
        fit = fit_ground_plane(render.depth, render.ground_mask, CAM, RansacParams())
        truth = camera_frame_ground_plane(pose)
        angle = math.degrees(math.acos(np.clip(abs(fit.normal @ truth.normal), -1, 1)))
        assert angle < 0.1
        assert abs(fit.offset - truth.offset) < 1e-3

    def test_robust_to_outliers_and_noise(self):
        pose = tilted_pose()
        render = render_frame(simple_scene(), CAM, pose)
        rng = np.random.default_rng(123)
        depth = render.depth.copy()
        ground = render.ground_mask == 1
        noise = rng.normal(0.0, 0.01, size=depth.shape)
        depth[ground] += noise[ground]
        corrupt = ground & (rng.uniform(size=depth.shape) < 0.3)
        depth[corrupt] = rng.uniform(0.5, 20.0, size=int(corrupt.sum()))
        fit = fit_ground_plane(depth, render.ground_mask, CAM, RansacParams(seed=5))
        truth = camera_frame_ground_plane(pose)
        angle = math.degrees(math.acos(np.clip(abs(fit.normal @ truth.normal), -1, 1)))
        assert angle < 1.0

    def test_underdetermined_raises(self):
        depth = np.zeros((4, 4))
        mask = np.zeros((4, 4))
        depth[0, 0] = depth[1, 1] = 3.0
        mask[0, 0] = mask[1, 1] = 1
        small = Intrinsics(fx=10.0, fy=10.0, cx=1.5, cy=1.5, width=4, height=4)
        with pytest.raises(PlaneFitError):
            fit_ground_plane(depth, mask, small, RansacParams())

    def test_normal_points_toward_camera(self):
        render = render_frame(simple_scene(), CAM, tilted_pose())
        fit = fit_ground_plane(render.depth, render.ground_mask, CAM, RansacParams())
        assert fit.offset > 0  # camera origin on the positive side


class TestUntraversable:
    def test_box_footprint_coverage(self):
        scene = simple_scene(make_box(0.0, 5.0, 0.5, 0.5, 0.5))
        pose = tilted_pose()
        render = render_frame(scene, CAM, pose)
        plane = fit_ground_plane(render.depth, render.ground_mask, CAM, RansacParams())
        out = untraversable_from_depth(render.depth, render.ground_mask, plane, CAM)
        footprint = oracle_footprint_mask(scene, CAM, pose)
        assert footprint.sum() > 20
        coverage = (out & footprint).sum() / footprint.sum()
        assert coverage >= 0.8
        # False positives on true traversable ground stay rare.
        from conftest import oracle_hidden_mask

        traversable = oracle_hidden_mask(scene, CAM, pose)
        false_rate = (out & traversable).sum() / traversable.sum()
        assert false_rate <= 0.02

    def test_empty_scene_empty_mask(self):
        render = render_frame(simple_scene(), CAM, tilted_pose())
        plane = fit_ground_plane(render.depth, render.ground_mask, CAM, RansacParams())
        out = untraversable_from_depth(render.depth, render.ground_mask, plane, CAM)
        assert not out.any()

    def test_thin_pole_recovered(self):
        # The motivating case: a 0.1 m pole's footprint survives splatting.
        scene = simple_scene(make_box(0.2, 4.0, 0.05, 0.6, 0.05))
        pose = tilted_pose()
        render = render_frame(scene, CAM, pose)
        plane = fit_ground_plane(render.depth, render.ground_mask, CAM, RansacParams())
        out = untraversable_from_depth(render.depth, render.ground_mask, plane, CAM,
                                       min_component_px=4)
        footprint = oracle_footprint_mask(scene, CAM, pose)
        assert footprint.sum() > 0
        assert (out & footprint).sum() > 0

    def test_small_components_dropped(self):
        depth = np.zeros((16, 16))
        mask = np.zeros((16, 16))
        # A single floating depth point, high above the plane.
        depth[8, 8] = 2.0
        plane = Plane(np.array([0.0, 1.0, 0.0]), 1.5)
        small = Intrinsics(fx=20.0, fy=20.0, cx=7.5, cy=7.5, width=16, height=16)
        out = untraversable_from_depth(depth, mask, plane, small,
                                       min_component_px=20)
        assert not out.any()


class TestInducedFlow:
    def test_identity_zero_flow(self):
        render = render_frame(simple_scene(), CAM, tilted_pose())
        flow, valid = induced_flow(render.depth, Pose.identity(), CAM)
        assert np.any(valid == 1)
        np.testing.assert_allclose(flow[valid == 1], 0.0, atol=1e-12)
        np.testing.assert_array_equal(valid, (render.depth > 0).astype(np.uint8))

    def test_matches_oracle_flow_for_static_scene(self):
        scene = simple_scene(make_box(1.0, 6.0, 0.5, 0.5, 0.5))
        pose_t = tilted_pose(z=0.0)
        pose_t1 = tilted_pose(x=0.2, z=0.3)
        render = render_frame(scene, CAM, pose_t)
        oracle_flow, oracle_valid = ground_truth_flow(scene, CAM, pose_t, pose_t1)
        flow, valid = induced_flow(render.depth, relative_pose(pose_t, pose_t1), CAM)
        np.testing.assert_array_equal(valid, oracle_valid)
        both = valid == 1
        np.testing.assert_allclose(flow[both], oracle_flow[both], atol=1e-6)

    def test_forward_motion_radiates_from_center(self):
        render = render_frame(simple_scene(), CAM, tilted_pose(tilt_deg=40.0))
        # Camera advances 0.2 m along its optical axis.
        rel = Pose(np.eye(3), np.array([0.0, 0.0, -0.2]))
        flow, valid = induced_flow(render.depth, rel, CAM)
        us = np.arange(CAM.width)[None, :] - CAM.cx
        vs = np.arange(CAM.height)[:, None] - CAM.cy
        check = (valid == 1) & (np.abs(us) > 1.0)
        assert np.all(flow[..., 0][check] * np.broadcast_to(us, flow[..., 0].shape)[check] > 0)
        check_v = (valid == 1) & (np.abs(np.broadcast_to(vs, flow[..., 1].shape)) > 1.0)
        assert np.all(flow[..., 1][check_v] * np.broadcast_to(vs, flow[..., 1].shape)[check_v] > 0)


class TestMovingObjectMask:
    def test_tolerance_boundary(self):
        induced = np.zeros((1, 1, 2))
        optical = np.array([[[4.0, 0.0]]])
        ones = np.ones((1, 1))
        assert moving_object_mask(induced, ones, optical, ones, 3.0)[0, 0] == 0
        optical_close = np.array([[[2.9, 0.0]]])
        assert moving_object_mask(induced, ones, optical_close, ones, 3.0)[0, 0] == 1

    def test_identical_flows_unmasked(self):
        rng = np.random.default_rng(4)
        flow = rng.normal(size=(5, 5, 2))
        ones = np.ones((5, 5))
        np.testing.assert_array_equal(moving_object_mask(flow, ones, flow, ones),
                                      np.ones((5, 5), dtype=np.uint8))

    def test_invalid_pixels_stay_unmasked(self):
        induced = np.zeros((2, 2, 2))
        optical = np.full((2, 2, 2), 10.0)
        valid = np.array([[1, 0], [0, 1]])
        mask = moving_object_mask(induced, valid, optical, np.ones((2, 2)))
        np.testing.assert_array_equal(mask, [[0, 1], [1, 0]])

    def test_moving_box_detected_static_ground_kept(self):
        velocity = (0.45, 0.0, 0.0)
        scene = simple_scene(make_box(-1.0, 5.0, 0.6, 0.6, 0.6, velocity=velocity))
        pose = tilted_pose()
        render = render_frame(scene, CAM, pose, frame_index=0)
        optical, optical_valid = ground_truth_flow(scene, CAM, pose, pose, frame_t=0)
        flow, flow_valid = induced_flow(render.depth, Pose.identity(), CAM)
        mask = moving_object_mask(flow, flow_valid, optical, optical_valid, 3.0)
        box_pixels = (render.ground_mask == 0) & (render.depth > 0)
        ground_pixels = render.ground_mask == 1
        assert (mask[box_pixels] == 0).mean() >= 0.9
        assert (mask[ground_pixels] == 0).mean() <= 0.05


class TestBuildTrainingTarget:
    @staticmethod
    def make_sequence(scene, n_sources=8):
        from footprints.scene import camera_path

        poses = camera_path(n_sources + 1)
        target = render_frame(scene, CAM, poses[0], 0)
        sources = [render_frame(scene, CAM, poses[i], i) for i in range(1, n_sources + 1)]
        return target, sources, poses

    def test_partition_and_subtraction(self):
        scene = simple_scene(make_box(0.3, 5.0, 0.5, 0.5, 0.5))
        target, sources, _ = self.make_sequence(scene)
        result = build_training_target(target, sources)
        total = (result.traversable.astype(int) + result.untraversable.astype(int)
                 + result.unknown.astype(int))
        np.testing.assert_array_equal(total, np.ones_like(total))
        # The subtraction rule: traversable == supported minus untraversable.
        supported = aggregate_traversable(warp_sources(target, sources), 2)
        np.testing.assert_array_equal(
            result.traversable, ((supported == 1) & (result.untraversable == 0)).astype(np.uint8))
        assert np.all(result.hidden_depth[result.traversable == 0] == 0)

    def test_empty_scene_has_no_untraversable(self):
        target, sources, _ = self.make_sequence(simple_scene())
        result = build_training_target(target, sources)
        assert not result.untraversable.any()
        assert result.traversable.sum() > 0

    def test_requires_sources(self):
        target, _, _ = self.make_sequence(simple_scene())
        with pytest.raises(ValueError):
            build_training_target(target, [])

    def test_moving_box_masked(self):
        scene = simple_scene(make_box(-1.0, 5.0, 0.6, 0.6, 0.6, velocity=(0.45, 0, 0)))
        target, sources, poses = self.make_sequence(scene)
        optical, optical_valid = ground_truth_flow(scene, CAM, poses[0], poses[1], 0)
        result = build_training_target(target, sources, optical_flow=optical,
                                       optical_flow_valid=optical_valid,
                                       next_pose=poses[1])
        box_pixels = (target.ground_mask == 0) & (target.depth > 0)
        assert (result.moving_mask[box_pixels] == 0).mean() >= 0.9

    def test_flow_needs_next_pose(self):
        target, sources, _ = self.make_sequence(simple_scene())
        with pytest.raises(ValueError):
            build_training_target(target, sources,
                                  optical_flow=np.zeros((CAM.height, CAM.width, 2)))


class TestTrainingTargetType:
    def test_rejects_overlapping_sets(self):
        ones = np.ones((2, 2))
        with pytest.raises(ValueError):
            TrainingTarget(ones, ones, ones, np.zeros((2, 2)), ones, ones)

    def test_rejects_depth_outside_traversable(self):
        trav = np.zeros((2, 2))
        depth = np.full((2, 2), 3.0)
        with pytest.raises(ValueError):
            TrainingTarget(trav, np.zeros((2, 2)), np.ones((2, 2)), depth,
                           np.zeros((2, 2)), np.zeros((2, 2)))
