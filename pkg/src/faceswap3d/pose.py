"""Pinhole camera model and pose recovery from 2D-3D correspondences.

Camera frame: x right, y down, z forward (points in front have positive z).
Continuous image coordinates put pixel (i, j) over [i,i+1)x[j,j+1), so the
principal point of a centered camera is (width/2, height/2).

Pose recovery runs the EPnP closed form (4 control points, 3 when the points
are near-planar) followed by Gauss-Newton refinement of the reprojection
error, which tightens noiseless round trips to machine precision.
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateConfigurationError,
    InsufficientCorrespondencesError,
    InvalidArgumentError,
)

MIN_CORRESPONDENCES = 6
PLANARITY_RATIO = 1e-6
GN_ITERATIONS = 10


@dataclass(frozen=True)
class CameraIntrinsics:
    focal: float
    principal_point: Tuple[float, float]
    image_size: Tuple[int, int]  # (width, height)

    def __post_init__(self):
        if self.focal <= 0:
            raise InvalidArgumentError("focal length must be positive")
        w, h = self.image_size
        px, py = self.principal_point
        if not (0 <= px <= w and 0 <= py <= h):
            raise InvalidArgumentError("principal point must lie inside the image")


def default_intrinsics(width: int, height: int, focal: float | None = None) -> CameraIntrinsics:
    """Face-photo default: focal = 1.5 * max(side), principal point centered."""
    if focal is None:
        focal = 1.5 * max(width, height)
    return CameraIntrinsics(focal=float(focal),
                            principal_point=(width / 2.0, height / 2.0),
                            image_size=(width, height))


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray  # (3,3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        R = self.rotation
        if R.shape != (3, 3) or self.translation.shape != (3,):
            raise InvalidArgumentError("pose needs a 3x3 rotation and 3-vector translation")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6:
            raise InvalidArgumentError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise InvalidArgumentError("rotation determinant is not +1")

    @classmethod
    def identity(cls, distance: float = 0.0) -> "Pose":
        return cls(rotation=np.eye(3), translation=np.array([0.0, 0.0, distance]))


def rotvec_to_matrix(r: np.ndarray) -> np.ndarray:
    """Rodrigues vector -> rotation matrix."""
    r = np.asarray(r, dtype=np.float64)
    theta = np.linalg.norm(r)
    K = np.array([[0.0, -r[2], r[1]],
                  [r[2], 0.0, -r[0]],
                  [-r[1], r[0], 0.0]])
    if theta < 1e-8:
        # second-order series, exact enough below the threshold
        return np.eye(3) + K + 0.5 * (K @ K)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def matrix_to_rotvec(R: np.ndarray) -> np.ndarray:
    """Rotation matrix -> Rodrigues vector (angle in [0, pi])."""
    cos_t = (np.trace(R) - 1.0) / 2.0
    cos_t = min(1.0, max(-1.0, cos_t))
    theta = math.acos(cos_t)
    if theta < 1e-8:
        w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        return 0.5 * w
    if theta > math.pi - 1e-6:
        # near pi: axis from the dominant column of R + I
        A = R + np.eye(3)
        k = int(np.argmax(np.diag(A)))
        axis = A[:, k] / np.linalg.norm(A[:, k])
        w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        if np.dot(axis, w) < 0:
            axis = -axis
        return axis * theta
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w * (theta / (2.0 * math.sin(theta)))


def geodesic_distance(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Rotation angle of Ra^T Rb, in radians."""
    cos_t = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos_t)))


def project(points: np.ndarray, pose: Pose, cam: CameraIntrinsics):
    """Pinhole projection of world points; returns ((M,2) pixels, (M,) depths)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    Y = pts @ pose.rotation.T + pose.translation
    z = Y[:, 2]
    bad = np.nonzero(z <= 0.0)[0]
    if bad.size:
        raise BehindCameraError(int(bad[0]), float(z[bad[0]]))
    px, py = cam.principal_point
    uv = np.empty((pts.shape[0], 2))
    uv[:, 0] = cam.focal * Y[:, 0] / z + px
    uv[:, 1] = cam.focal * Y[:, 1] / z + py
    return uv, z.copy()


def reprojection_rms(p2d, p3d, pose: Pose, cam: CameraIntrinsics) -> float:
    uv, _ = project(p3d, pose, cam)
    return float(np.sqrt(np.mean(np.sum((uv - p2d) ** 2, axis=1))))


# --- EPnP --------------------------------------------------------------------

def _control_points(p3d: np.ndarray):
    """Centroid + principal directions; 3 control points for planar clouds."""
    centroid = p3d.mean(axis=0)
    centered = p3d - centroid
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] == 0.0 or svals[1] < PLANARITY_RATIO * svals[0]:
        raise DegenerateConfigurationError(
            "3D points are collinear or coincident; pose is unconstrained")
    planar = svals[2] < PLANARITY_RATIO * svals[0]
    k = 2 if planar else 3
    scales = svals[:k] / math.sqrt(p3d.shape[0])
    ctrl = [centroid]
    for j in range(k):
        ctrl.append(centroid + scales[j] * vt[j])
    return np.asarray(ctrl), planar


def _barycentric(p3d: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
    """Coordinates alpha with sum 1 reproducing each point from the controls."""
    k = ctrl.shape[0]
    A = np.vstack([ctrl.T, np.ones(k)])  # 4 x k
    B = np.vstack([p3d.T, np.ones(p3d.shape[0])])  # 4 x L
    alphas, *_ = np.linalg.lstsq(A, B, rcond=None)
    return alphas.T  # L x k


def _assemble_m(p2d, alphas, cam: CameraIntrinsics) -> np.ndarray:
    L, k = alphas.shape
    f = cam.focal
    cx, cy = cam.principal_point
    M = np.zeros((2 * L, 3 * k))
    for j in range(k):
        a = alphas[:, j]
        M[0::2, 3 * j + 0] = a * f
        M[0::2, 3 * j + 2] = a * (cx - p2d[:, 0])
        M[1::2, 3 * j + 1] = a * f
        M[1::2, 3 * j + 2] = a * (cy - p2d[:, 1])
    return M


def _pairs(k: int):
    return [(a, b) for a in range(k) for b in range(a + 1, k)]


def _candidate_betas(vs, ctrl_w):
    """Approximate beta combinations for the 1, 2, and 3 null-vector cases."""
    k = ctrl_w.shape[0]
    pairs = _pairs(k)
    rho = np.array([np.sum((ctrl_w[a] - ctrl_w[b]) ** 2) for a, b in pairs])
    dv = [np.array([v.reshape(k, 3)[a] - v.reshape(k, 3)[b] for a, b in pairs])
          for v in vs]

    cands = []
    # N = 1: match distances in a least-squares sense
    num = sum(np.linalg.norm(dv[0][p]) * math.sqrt(rho[p]) for p in range(len(pairs)))
    den = sum(np.sum(dv[0][p] ** 2) for p in range(len(pairs)))
    if den > 0:
        cands.append(np.array([num / den] + [0.0] * (len(vs) - 1)))

    if len(vs) >= 2 and len(pairs) >= 3:
        Lm = np.stack([
            np.sum(dv[0] * dv[0], axis=1),
            2.0 * np.sum(dv[0] * dv[1], axis=1),
            np.sum(dv[1] * dv[1], axis=1),
        ], axis=1)
        sol, *_ = np.linalg.lstsq(Lm, rho, rcond=None)
        b1 = math.sqrt(abs(sol[0]))
        b2 = math.sqrt(abs(sol[2]))
        if sol[1] < 0:
            b2 = -b2
        cands.append(np.array([b1, b2] + [0.0] * (len(vs) - 2)))

    if len(vs) >= 3 and len(pairs) >= 6:
        Lm = np.stack([
            np.sum(dv[0] * dv[0], axis=1),
            2.0 * np.sum(dv[0] * dv[1], axis=1),
            np.sum(dv[1] * dv[1], axis=1),
            2.0 * np.sum(dv[0] * dv[2], axis=1),
            2.0 * np.sum(dv[1] * dv[2], axis=1),
            np.sum(dv[2] * dv[2], axis=1),
        ], axis=1)
        sol, *_ = np.linalg.lstsq(Lm, rho, rcond=None)
        b1 = math.sqrt(abs(sol[0]))
        b2 = math.sqrt(abs(sol[2]))
        b3 = math.sqrt(abs(sol[5]))
        if sol[1] < 0:
            b2 = -b2
        if sol[3] < 0:
            b3 = -b3
        cands.append(np.array([b1, b2, b3] + [0.0] * (len(vs) - 3)))
    return cands


def _procrustes(Xw: np.ndarray, Yc: np.ndarray):
    cw = Xw.mean(axis=0)
    cc = Yc.mean(axis=0)
    H = (Xw - cw).T @ (Yc - cc)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = cc - R @ cw
    return R, t


def _pose_from_betas(betas, vs, alphas, p3d):
    k = alphas.shape[1]
    x = np.zeros(3 * k)
    for b, v in zip(betas, vs):
        x += b * v
    cc = x.reshape(k, 3)
    Yc = alphas @ cc
    if Yc[:, 2].mean() < 0:  # cheirality: flip the null-space sign
        Yc = -Yc
    return _procrustes(p3d, Yc)


def _refine_gauss_newton(R, t, p2d, p3d, cam: CameraIntrinsics):
    """Minimize reprojection error over (R, t); up to GN_ITERATIONS steps."""
    f = cam.focal
    cx, cy = cam.principal_point
    for _ in range(GN_ITERATIONS):
        Y = p3d @ R.T + t
        z = Y[:, 2]
        if np.any(z <= 0):
            break
        u = f * Y[:, 0] / z + cx
        v = f * Y[:, 1] / z + cy
        r = np.empty(2 * p3d.shape[0])
        r[0::2] = u - p2d[:, 0]
        r[1::2] = v - p2d[:, 1]

        # du/dY and dv/dY rows of the pinhole Jacobian
        J = np.zeros((2 * p3d.shape[0], 6))
        RX = Y - t
        du = np.stack([f / z, np.zeros_like(z), -f * Y[:, 0] / z ** 2], axis=1)
        dv = np.stack([np.zeros_like(z), f / z, -f * Y[:, 1] / z ** 2], axis=1)
        # dY/domega = -skew(RX), dY/dt = I
        for i in range(p3d.shape[0]):
            S = np.array([[0.0, -RX[i, 2], RX[i, 1]],
                          [RX[i, 2], 0.0, -RX[i, 0]],
                          [-RX[i, 1], RX[i, 0], 0.0]])
            J[2 * i, :3] = -du[i] @ S
            J[2 * i, 3:] = du[i]
            J[2 * i + 1, :3] = -dv[i] @ S
            J[2 * i + 1, 3:] = dv[i]
        JtJ = J.T @ J
        Jtr = J.T @ r
        try:
            delta = np.linalg.solve(JtJ, -Jtr)
        except np.linalg.LinAlgError:
            break
        R = rotvec_to_matrix(delta[:3]) @ R
        t = t + delta[3:]
        if np.linalg.norm(delta) < 1e-14:
            break
    return R, t


def estimate_pose(p2d, p3d, cam: CameraIntrinsics) -> Pose:
    """Recover (R, t) from 2D-3D correspondences with EPnP + refinement."""
    p2d = np.asarray(p2d, dtype=np.float64).reshape(-1, 2)
    p3d = np.asarray(p3d, dtype=np.float64).reshape(-1, 3)
    if p2d.shape[0] != p3d.shape[0]:
        raise InvalidArgumentError("correspondence lists differ in length")
    if p2d.shape[0] < MIN_CORRESPONDENCES:
        raise InsufficientCorrespondencesError(
            f"need at least {MIN_CORRESPONDENCES} correspondences, got {p2d.shape[0]}")

    ctrl_w, _ = _control_points(p3d)
    alphas = _barycentric(p3d, ctrl_w)
    M = _assemble_m(p2d, alphas, cam)
    MtM = M.T @ M
    evals, evecs = np.linalg.eigh(MtM)
    n_null = min(4, evecs.shape[1])
    vs = [evecs[:, i] for i in range(n_null)]

    best = None
    for betas in _candidate_betas(vs, ctrl_w):
        R, t = _pose_from_betas(betas, vs, alphas, p3d)
        Y = p3d @ R.T + t
        if np.any(Y[:, 2] <= 0):
            continue
        uv = np.empty_like(p2d)
        uv[:, 0] = cam.focal * Y[:, 0] / Y[:, 2] + cam.principal_point[0]
        uv[:, 1] = cam.focal * Y[:, 1] / Y[:, 2] + cam.principal_point[1]
        err = float(np.mean(np.sum((uv - p2d) ** 2, axis=1)))
        if best is None or err < best[0]:
            best = (err, R, t)
    if best is None:
        raise DegenerateConfigurationError("no EPnP candidate kept the points in front")

    R, t = _refine_gauss_newton(best[1], best[2], p2d, p3d, cam)
    # orthonormalize away accumulated float drift
    U, _, Vt = np.linalg.svd(R)
    R = U @ np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))]) @ Vt
    return Pose(rotation=R, translation=t)


# --- JSON formats ------------------------------------------------------------

def save_pose(pose: Pose, cam: CameraIntrinsics, path) -> None:
    payload = {
        "rodrigues": [float(x) for x in matrix_to_rotvec(pose.rotation)],
        "t": [float(x) for x in pose.translation],
        "focal": float(cam.focal),
        "pp": [float(x) for x in cam.principal_point],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_pose(path, image_size) -> tuple[Pose, CameraIntrinsics]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    pose = Pose(rotation=rotvec_to_matrix(np.asarray(payload["rodrigues"], dtype=np.float64)),
                translation=np.asarray(payload["t"], dtype=np.float64))
    cam = CameraIntrinsics(focal=float(payload["focal"]),
                           principal_point=tuple(payload["pp"]),
                           image_size=tuple(image_size))
    return pose, cam


def save_landmarks(image_ref: str, points: np.ndarray, path) -> None:
    payload = {"image": image_ref,
               "points": [[float(x), float(y)] for x, y in np.asarray(points)]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_landmarks(path) -> tuple[str, np.ndarray]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    pts = np.asarray(payload["points"], dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgumentError("landmark file must hold [[x, y], ...]")
    return payload.get("image", ""), pts
