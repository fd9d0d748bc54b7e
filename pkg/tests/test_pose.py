import numpy as np
import pytest

from faceswap3d.errors import (
    BehindCameraError,
    DegenerateConfigurationError,
    InsufficientCorrespondencesError,
)
from faceswap3d.model import ShapeCoeffs, select_landmarks, synthesize_shape
from faceswap3d.pose import (
    CameraIntrinsics,
    Pose,
    default_intrinsics,
    estimate_pose,
    geodesic_distance,
    load_pose,
    matrix_to_rotvec,
    project,
    reprojection_rms,
    rotvec_to_matrix,
    save_pose,
)
from oracles import project_homogeneous


def random_pose(r, max_yaw=75.0):
    yaw = np.radians(r.uniform(-max_yaw, max_yaw))
    pitch = np.radians(r.uniform(-20, 20))
    roll = np.radians(r.uniform(-15, 15))
    R = (rotvec_to_matrix(np.array([0, 0, roll]))
         @ rotvec_to_matrix(np.array([pitch, 0, 0]))
         @ rotvec_to_matrix(np.array([0, yaw, 0])))
    t = np.array([r.uniform(-25, 25), r.uniform(-25, 25), r.uniform(420, 650)])
    return Pose(rotation=R, translation=t)


class TestProject:
    def test_optical_axis(self):
        cam = default_intrinsics(200, 100)
        uv, depth = project(np.array([[0.0, 0.0, 7.5]]), Pose.identity(), cam)
        assert np.allclose(uv[0], cam.principal_point)
        assert depth[0] == 7.5

    def test_pinhole_formula(self):
        cam = CameraIntrinsics(focal=120.0, principal_point=(50.0, 40.0),
                               image_size=(100, 80))
        pose = Pose.identity(distance=10.0)
        uv, depth = project(np.array([[2.0, -3.0, 0.0]]), pose, cam)
        assert np.allclose(uv[0], [50 + 120 * 2 / 10, 40 + 120 * -3 / 10])
        assert depth[0] == 10.0

    def test_matches_homogeneous_matrix_oracle(self):
        r = np.random.default_rng(12)
        cam = default_intrinsics(320, 240)
        for _ in range(100):
            pose = random_pose(r)
            pts = r.uniform(-60, 60, (10, 3))
            uv, depth = project(pts, pose, cam)
            uv2, z2 = project_homogeneous(pts, pose.rotation, pose.translation,
                                          cam.focal, cam.principal_point)
            assert np.abs(uv - uv2).max() < 1e-9
            assert np.abs(depth - z2).max() < 1e-9

    def test_behind_camera_names_point(self):
        cam = default_intrinsics(100, 100)
        pts = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, -1.0]])
        with pytest.raises(BehindCameraError) as exc:
            project(pts, Pose.identity(), cam)
        assert exc.value.index == 1

    def test_rotation_equivariance(self):
        r = np.random.default_rng(5)
        cam = default_intrinsics(200, 200)
        pts = r.uniform(-50, 50, (20, 3))
        pose = random_pose(r)
        Q = rotvec_to_matrix(r.normal(0, 0.4, 3))
        uv1, _ = project(pts @ Q.T, pose, cam)
        uv2, _ = project(pts, Pose(rotation=pose.rotation @ Q,
                                   translation=pose.translation), cam)
        assert np.abs(uv1 - uv2).max() < 1e-9


class TestEstimatePose:
    def test_exact_round_trip_identity(self, model_mapping):
        model, mapping = model_mapping
        cam = default_intrinsics(160, 160)
        pose = Pose.identity(distance=500.0)
        p3d = select_landmarks(synthesize_shape(model, None, None), mapping)
        p2d, _ = project(p3d, pose, cam)
        est = estimate_pose(p2d, p3d, cam)
        assert reprojection_rms(p2d, p3d, est, cam) < 1e-3

    def test_round_trip_random_poses(self, model_mapping):
        model, mapping = model_mapping
        cam = default_intrinsics(160, 160)
        r = np.random.default_rng(42)
        p3d = select_landmarks(synthesize_shape(model, None, None), mapping)
        for _ in range(25):
            pose = random_pose(r)
            p2d, _ = project(p3d, pose, cam)
            est = estimate_pose(p2d, p3d, cam)
            assert geodesic_distance(pose.rotation, est.rotation) < 1e-3
            assert reprojection_rms(p2d, p3d, est, cam) < 1e-3

    def test_alpha_specific_shape(self, model_mapping):
        model, mapping = model_mapping
        cam = default_intrinsics(160, 160)
        r = np.random.default_rng(9)
        pose = random_pose(r)
        alpha = ShapeCoeffs(alpha=r.normal(0, 3, model.shape_dim))
        p3d = select_landmarks(synthesize_shape(model, alpha, None), mapping)
        p2d, _ = project(p3d, pose, cam)
        est = estimate_pose(p2d, p3d, cam)
        assert geodesic_distance(pose.rotation, est.rotation) < 1e-3

    def test_too_few_points(self):
        cam = default_intrinsics(100, 100)
        with pytest.raises(InsufficientCorrespondencesError):
            estimate_pose(np.zeros((5, 2)), np.zeros((5, 3)), cam)

    def test_collinear_points_degenerate(self):
        cam = default_intrinsics(100, 100)
        p3d = np.stack([np.linspace(-5, 5, 8), np.zeros(8), np.zeros(8)], axis=1)
        p2d = np.tile(np.array([50.0, 50.0]), (8, 1))
        with pytest.raises(DegenerateConfigurationError):
            estimate_pose(p2d, p3d, cam)

    def test_planar_points_use_reduced_basis(self):
        # coplanar cloud still recovers the pose via the 3-control-point path
        r = np.random.default_rng(21)
        cam = default_intrinsics(200, 200)
        p3d = np.stack([r.uniform(-40, 40, 30), r.uniform(-50, 50, 30),
                        np.zeros(30)], axis=1)
        pose = random_pose(r, max_yaw=40.0)
        p2d, _ = project(p3d, pose, cam)
        est = estimate_pose(p2d, p3d, cam)
        assert geodesic_distance(pose.rotation, est.rotation) < 1e-3
        assert reprojection_rms(p2d, p3d, est, cam) < 1e-3

    def test_noise_robustness(self, model_mapping):
        model, mapping = model_mapping
        cam = default_intrinsics(160, 160)
        r = np.random.default_rng(77)
        p3d = select_landmarks(synthesize_shape(model, None, None), mapping)
        errs = []
        for _ in range(60):
            pose = random_pose(r)
            p2d, _ = project(p3d, pose, cam)
            est = estimate_pose(p2d + r.normal(0, 1, p2d.shape), p3d, cam)
            errs.append(np.degrees(geodesic_distance(pose.rotation, est.rotation)))
        assert np.median(errs) < 2.0


class TestRotationsAndIO:
    def test_rotvec_round_trip(self):
        r = np.random.default_rng(2)
        for _ in range(50):
            v = r.normal(0, 1.2, 3)
            R = rotvec_to_matrix(v)
            assert np.abs(R.T @ R - np.eye(3)).max() < 1e-12
            v2 = matrix_to_rotvec(R)
            assert np.abs(rotvec_to_matrix(v2) - R).max() < 1e-10

    def test_small_angle(self):
        v = np.array([1e-10, -2e-10, 5e-11])
        R = rotvec_to_matrix(v)
        assert np.abs(matrix_to_rotvec(R) - v).max() < 1e-15

    def test_pose_json_round_trip(self, tmp_path):
        r = np.random.default_rng(8)
        pose = random_pose(r)
        cam = default_intrinsics(320, 240, focal=500.0)
        p = tmp_path / "pose.json"
        save_pose(pose, cam, p)
        pose2, cam2 = load_pose(p, image_size=(320, 240))
        assert geodesic_distance(pose.rotation, pose2.rotation) < 1e-12
        assert np.allclose(pose.translation, pose2.translation)
        assert cam2.focal == 500.0

    def test_invalid_rotation_rejected(self):
        with pytest.raises(Exception):
            Pose(rotation=np.eye(3) * 2.0, translation=np.zeros(3))

    def test_default_intrinsics_rule(self):
        cam = default_intrinsics(640, 480)
        assert cam.focal == 1.5 * 640
        assert cam.principal_point == (320.0, 240.0)
