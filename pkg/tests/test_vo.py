"""Visual odometry: poses, unsharp mask, backprojection, RANSAC, sequences."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from codedcam import (
    Intrinsics,
    Pose,
    Trajectory,
    VoConfig,
    backproject,
    estimate_relative_pose,
    run_odometry,
    unsharp_mask,
)
from codedcam.errors import PoseEstimationError
from codedcam.features import Keypoint
from codedcam.vo import rigid_fit

INTR = Intrinsics(fx=250.0, fy=250.0, cx=80.0, cy=60.0)


def random_rigid(rng, angle_scale=0.5, t_scale=1.0):
    rot = Rotation.from_rotvec(rng.normal(0, angle_scale, 3)).as_matrix()
    t = rng.normal(0, t_scale, 3)
    return rot, t


class TestPose:
    def test_identity_compose_inverse(self):
        rng = np.random.default_rng(31)
        rot, t = random_rigid(rng)
        pose = Pose(rot, t)
        round_trip = pose.compose(pose.inverse())
        np.testing.assert_allclose(round_trip.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(round_trip.translation, 0.0, atol=1e-12)

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 2.0, np.zeros(3))

    def test_orthonormality_after_composition_chain(self):
        rng = np.random.default_rng(32)
        pose = Pose.identity()
        for _ in range(200):
            rot, t = random_rigid(rng, 0.3, 0.1)
            pose = pose.compose(Pose(rot, t))
        err = np.abs(pose.rotation @ pose.rotation.T - np.eye(3)).max()
        assert err < 1e-9
        assert abs(np.linalg.det(pose.rotation) - 1.0) < 1e-9


class TestTrajectory:
    def test_requires_increasing_timestamps(self):
        with pytest.raises(ValueError):
            Trajectory([Pose.identity(1.0), Pose.identity(1.0)])
        with pytest.raises(ValueError):
            Trajectory([])

    def test_positions_and_timestamps(self):
        traj = Trajectory([Pose(np.eye(3), [0, 0, 0], 0.0),
                           Pose(np.eye(3), [1, 0, 0], 1.0)])
        np.testing.assert_array_equal(traj.timestamps, [0.0, 1.0])
        assert traj.positions.shape == (2, 3)


class TestUnsharpMask:
    def test_amount_zero_identity(self):
        rng = np.random.default_rng(33)
        img = rng.random((32, 32))
        np.testing.assert_allclose(unsharp_mask(img, 0.0, 2.0), img, atol=1e-12)

    def test_constant_unchanged(self):
        img = np.full((32, 32), 0.4)
        np.testing.assert_allclose(unsharp_mask(img, 1.5, 2.0), img, atol=1e-12)

    def test_step_edge_gradient_increases(self):
        img = np.zeros((32, 64))
        img[:, 32:] = 0.3  # margin below 1 so sharpening is not clipped away
        img += 0.2
        out = unsharp_mask(img, 1.0, 2.0)
        grad_in = np.abs(np.diff(img, axis=1)).max()
        grad_out = np.abs(np.diff(out, axis=1)).max()
        assert grad_out > grad_in

    def test_output_clamped(self):
        rng = np.random.default_rng(34)
        out = unsharp_mask(rng.random((32, 32)), 3.0, 1.5)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestBackproject:
    def _kp(self, x, y):
        return Keypoint(x=x, y=y, pyramid_level=0, score=1.0,
                        descriptor=np.zeros(32, dtype=np.uint8))

    def test_principal_point(self):
        depth = np.full((120, 160), 2.0)
        p = backproject(self._kp(80.0, 60.0), depth, INTR, 3.0)
        np.testing.assert_allclose(p, [0.0, 0.0, 2.0])

    def test_depth_gate(self):
        depth = np.full((120, 160), 3.5)
        assert backproject(self._kp(80.0, 60.0), depth, INTR, 3.0) is None

    def test_unit_offset(self):
        intr = Intrinsics(fx=100.0, fy=100.0, cx=80.0, cy=60.0)
        depth = np.full((200, 200), 1.0)
        p = backproject(self._kp(intr.cx + intr.fx, intr.cy), depth, intr, 3.0)
        np.testing.assert_allclose(p, [1.0, 0.0, 1.0])

    def test_invalid_depth(self):
        depth = np.zeros((120, 160))
        assert backproject(self._kp(10.0, 10.0), depth, INTR, 3.0) is None


class TestEstimateRelativePose:
    def test_identity_on_equal_clouds(self):
        rng = np.random.default_rng(35)
        pts = rng.uniform(-1, 1, (50, 3))
        pose, inliers = estimate_relative_pose(pts, pts, VoConfig(seed=0))
        assert inliers == 50
        np.testing.assert_allclose(pose.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(pose.translation, 0.0, atol=1e-9)

    def test_exact_recovery_noiseless(self):
        rng = np.random.default_rng(36)
        prev = rng.uniform(-1, 1, (60, 3))
        rot, t = random_rigid(rng)
        curr = prev @ rot.T + t
        pose, _ = estimate_relative_pose(prev, curr, VoConfig(seed=1))
        angle = Rotation.from_matrix(pose.rotation.T @ rot).magnitude()
        assert angle < 1e-6
        assert np.linalg.norm(pose.translation - t) < 1e-6

    def test_outlier_robustness_20_trials(self):
        for trial in range(20):
            rng = np.random.default_rng(100 + trial)
            prev = rng.uniform(-1, 1, (80, 3))
            rot, t = random_rigid(rng)
            curr = prev @ rot.T + t
            n_out = 24  # 30%
            idx = rng.choice(80, size=n_out, replace=False)
            curr[idx] += rng.uniform(0.5, 2.0, (n_out, 3))
            pose, _ = estimate_relative_pose(prev, curr, VoConfig(seed=trial))
            angle = Rotation.from_matrix(pose.rotation.T @ rot).magnitude()
            assert angle < 1e-3
            assert np.linalg.norm(pose.translation - t) < 1e-3

    def test_too_few_points(self):
        pts = np.zeros((2, 3))
        with pytest.raises(PoseEstimationError):
            estimate_relative_pose(pts, pts, VoConfig())

    def test_min_inliers_enforced(self):
        rng = np.random.default_rng(37)
        prev = rng.uniform(-1, 1, (10, 3))
        curr = rng.uniform(-1, 1, (10, 3))  # unrelated: no rigid consensus
        with pytest.raises(PoseEstimationError):
            estimate_relative_pose(prev, curr, VoConfig(seed=2, min_inliers=9))

    def test_rigid_fit_scale_invariance_of_residuals(self):
        rng = np.random.default_rng(38)
        src = rng.uniform(-1, 1, (40, 3))
        dst = src @ random_rigid(rng)[0].T + 0.3
        rot, t = rigid_fit(src, dst)
        base = np.linalg.norm(dst - (src @ rot.T + t), axis=1)
        # jointly transforming both clouds leaves residual statistics unchanged
        rot2, t2 = random_rigid(rng)
        src2 = src @ rot2.T + t2
        dst2 = dst @ rot2.T + t2
        rot_j, t_j = rigid_fit(src2, dst2)
        joint = np.linalg.norm(dst2 - (src2 @ rot_j.T + t_j), axis=1)
        np.testing.assert_allclose(np.sort(base), np.sort(joint), atol=1e-9)


class TestRunOdometry:
    def _static_frames(self, n=4):
        rng = np.random.default_rng(39)
        rgb = rng.random((120, 160, 3))
        depth = np.full((120, 160), 1.5)
        return [(rgb, depth, 0.1 * i) for i in range(n)]

    def test_identical_frames_identity(self):
        traj = run_odometry(self._static_frames(), INTR, VoConfig(seed=0))
        for pose in traj.poses:
            np.testing.assert_allclose(pose.rotation, np.eye(3), atol=1e-6)
            np.testing.assert_allclose(pose.translation, 0.0, atol=1e-6)

    def test_output_length_and_timestamps(self):
        frames = self._static_frames(5)
        traj = run_odometry(frames, INTR, VoConfig(seed=0))
        assert len(traj) == 5
        np.testing.assert_array_equal(traj.timestamps, [f[2] for f in frames])

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            run_odometry(self._static_frames(1), INTR, VoConfig())

    def test_depth_gate_inactive_when_scene_near(self):
        frames = self._static_frames(3)  # everything at 1.5 m
        a = run_odometry(frames, INTR, VoConfig(seed=0, depth_gate=3.0))
        b = run_odometry(frames, INTR, VoConfig(seed=0, depth_gate=1e9))
        for pa, pb in zip(a.poses, b.poses):
            np.testing.assert_allclose(pa.rotation, pb.rotation, atol=1e-12)
            np.testing.assert_allclose(pa.translation, pb.translation, atol=1e-12)

    def test_rotations_orthonormal(self):
        traj = run_odometry(self._static_frames(4), INTR, VoConfig(seed=0))
        for pose in traj.poses:
            err = np.abs(pose.rotation @ pose.rotation.T - np.eye(3)).max()
            assert err < 1e-9

    def test_constant_velocity_fallback(self, caplog):
        # featureless frames cannot be tracked; trajectory must still have
        # one pose per frame
        frames = [(np.full((120, 160, 3), 0.5), np.full((120, 160), 1.0), 0.1 * i)
                  for i in range(3)]
        import logging
        with caplog.at_level(logging.WARNING, logger="codedcam.vo"):
            traj = run_odometry(frames, INTR, VoConfig(seed=0))
        assert len(traj) == 3
        assert any("constant velocity" in r.message for r in caplog.records)
