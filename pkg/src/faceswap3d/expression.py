"""Expression fitting as bounded linear least squares.

Given a pose, landmark residuals are linear in the expression coefficients
once the projection is written in homogeneous form and normalized by the
current landmark depth: for landmark i with camera-frame neutral point Y and
basis slice E (3 x Ke),

    [ f*(R E)_x - (u - cx)*(R E)_z ] / Y_z * gamma = u - u_neutral

and likewise for v. This keeps the system exactly linear (no Jacobian
truncation), so noiseless in-bound expressions are recovered to solver
precision. Coefficients are constrained to |gamma_j| <= 3 sigma_j and solved
with an active-set bounded-variable least-squares routine.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, NoVisibleLandmarksError
from .model import (
    ExpressionCoeffs,
    LandmarkMapping,
    MorphableModel,
    ShapeCoeffs,
    Vertices,
    compute_vertex_normals,
)
from .pose import CameraIntrinsics, Pose

EXPRESSION_BOUND_SIGMAS = 3.0
UNDERDETERMINED_RIDGE = 1e-6


@dataclass(frozen=True)
class VisibilityFilter:
    """Landmark positions (0-based, in mapping order) that face the camera."""

    visible_indices: np.ndarray

    def __len__(self) -> int:
        return self.visible_indices.size


@dataclass
class BoundedLLSProblem:
    design: np.ndarray  # (M, K)
    rhs: np.ndarray  # (M,)
    lower: np.ndarray  # (K,)
    upper: np.ndarray  # (K,)

    def __post_init__(self):
        if self.design.ndim != 2 or self.design.shape[0] < 1:
            raise InvalidArgumentError("design matrix must be (M, K) with M >= 1")
        m, k = self.design.shape
        if self.rhs.shape != (m,):
            raise InvalidArgumentError("rhs length must match design rows")
        if self.lower.shape != (k,) or self.upper.shape != (k,):
            raise InvalidArgumentError("bounds length must match design columns")
        if np.any(self.lower > self.upper):
            raise InvalidArgumentError("lower bound exceeds upper bound")


def visible_landmarks(mapping: LandmarkMapping, vertices: Vertices, pose: Pose) -> VisibilityFilter:
    """Keep landmarks whose rotated surface normal points toward the camera.

    A normal with negative camera-frame z faces the viewer; back-facing
    landmarks (e.g. the far jaw contour under strong yaw) are dropped.
    """
    if vertices.normals is None:
        raise InvalidArgumentError("vertices carry no normals; compute them first")
    n = vertices.normals[np.asarray(mapping.vertex_indices)]
    z_cam = (n @ pose.rotation.T)[:, 2]
    return VisibilityFilter(visible_indices=np.nonzero(z_cam < 0.0)[0])


def solve_bounded_lls(problem: BoundedLLSProblem, max_iter: Optional[int] = None) -> np.ndarray:
    """Active-set bounded-variable least squares.

    Pivots by the most-violated KKT multiplier (first index on ties), takes
    partial steps to the first bound hit, and terminates at the exact
    constrained minimizer. The result satisfies the bounds exactly.
    """
    A = np.asarray(problem.design, dtype=np.float64)
    b = np.asarray(problem.rhs, dtype=np.float64)
    lo = np.asarray(problem.lower, dtype=np.float64)
    hi = np.asarray(problem.upper, dtype=np.float64)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))
            and np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise InvalidArgumentError("bounded LLS input contains NaN or Inf")
    m, k = A.shape
    if max_iter is None:
        max_iter = 10 * k + 20

    # state: -1 at lower bound, +1 at upper, 0 free
    on_bound = np.zeros(k, dtype=np.int8)
    x = np.clip(np.zeros(k), lo, hi)

    def solve_free(free):
        """Least squares on the free variables with the rest held fixed."""
        fixed = ~free
        rhs = b - A[:, fixed] @ x[fixed] if fixed.any() else b
        z, *_ = np.linalg.lstsq(A[:, free], rhs, rcond=None)
        return z

    # initialization: shrink the free set until its LS solution is feasible
    free = np.ones(k, dtype=bool)
    while free.any():
        z = solve_free(free)
        idx = np.nonzero(free)[0]
        low_v = z < lo[idx]
        high_v = z > hi[idx]
        if not (low_v.any() or high_v.any()):
            x[idx] = z
            break
        x[idx[low_v]] = lo[idx[low_v]]
        on_bound[idx[low_v]] = -1
        x[idx[high_v]] = hi[idx[high_v]]
        on_bound[idx[high_v]] = 1
        keep = ~(low_v | high_v)
        x[idx[keep]] = z[keep]
        free[idx[~keep]] = False

    scale = max(1.0, float(np.abs(A).max()) * max(1.0, float(np.abs(b).max())))
    tol = 1e-11 * scale

    for _ in range(max_iter):
        g = A.T @ (A @ x - b)
        viol = np.zeros(k)
        at_lo = on_bound == -1
        at_hi = on_bound == 1
        viol[at_lo] = np.maximum(0.0, -g[at_lo])  # wants to increase
        viol[at_hi] = np.maximum(0.0, g[at_hi])  # wants to decrease
        if viol.max(initial=0.0) <= tol:
            break
        j = int(np.argmax(viol))
        on_bound[j] = 0

        # inner loop: re-solve on the free set, clipping to the first bound hit
        while True:
            free = on_bound == 0
            idx = np.nonzero(free)[0]
            z = solve_free(free)
            inside = (z >= lo[idx]) & (z <= hi[idx])
            if inside.all():
                x[idx] = z
                break
            # largest step t in [0,1) from x toward z staying feasible
            t_best = 1.0
            hit = -1
            hit_side = 0
            for pos, var in enumerate(idx):
                d = z[pos] - x[var]
                if d > 0 and z[pos] > hi[var]:
                    t = (hi[var] - x[var]) / d
                    side = 1
                elif d < 0 and z[pos] < lo[var]:
                    t = (lo[var] - x[var]) / d
                    side = -1
                else:
                    continue
                if t < t_best:
                    t_best = t
                    hit = var
                    hit_side = side
            if hit < 0:
                x[idx] = z
                break
            x[idx] = x[idx] + t_best * (z - x[idx])
            x[hit] = hi[hit] if hit_side == 1 else lo[hit]
            on_bound[hit] = hit_side

    return np.clip(x, lo, hi)


def _landmark_basis_rows(model: MorphableModel, mapping: LandmarkMapping):
    """Rows of the expression basis for each landmark vertex, as (L, 3, Ke)."""
    idx = np.asarray(mapping.vertex_indices)
    rows = np.stack([model.expr_basis[3 * idx + d] for d in range(3)], axis=1)
    return rows


def fit_expression(model: MorphableModel,
                   alpha: Optional[ShapeCoeffs],
                   pose: Pose,
                   p2d: np.ndarray,
                   mapping: LandmarkMapping,
                   cam: CameraIntrinsics,
                   visibility: Optional[VisibilityFilter] = None) -> ExpressionCoeffs:
    """Estimate bounded expression coefficients from visible landmarks."""
    p2d = np.asarray(p2d, dtype=np.float64)
    if p2d.shape != (len(mapping), 2):
        raise InvalidArgumentError(
            f"expected {len(mapping)} landmark points, got {p2d.shape}")

    if visibility is None:
        mean = Vertices(coords=model.mean_shape.reshape(-1, 3))
        mean.normals = compute_vertex_normals(mean.coords, model.triangles)
        visibility = visible_landmarks(mapping, mean, pose)
    vis = np.asarray(visibility.visible_indices)
    if vis.size == 0:
        raise NoVisibleLandmarksError("all landmarks rejected by the visibility check")

    idx = np.asarray(mapping.vertex_indices)
    flat = model.mean_shape.copy()
    if alpha is not None:
        a = np.asarray(alpha.alpha, dtype=np.float64)
        if a.shape != (model.shape_dim,):
            raise InvalidArgumentError("alpha length mismatch")
        flat = flat + model.shape_basis @ a
    X0 = flat.reshape(-1, 3)[idx]  # neutral landmark positions
    E = _landmark_basis_rows(model, mapping)  # (L, 3, Ke)

    R, t = pose.rotation, pose.translation
    f = cam.focal
    cx, cy = cam.principal_point

    Y0 = X0 @ R.T + t
    z = Y0[:, 2]
    usable = vis[z[vis] > 0.0]
    if usable.size == 0:
        raise NoVisibleLandmarksError("every visible landmark is behind the camera")

    ke = model.expr_dim
    rows = []
    rhs = []
    for i in usable:
        RE = R @ E[i]  # 3 x Ke
        zi = z[i]
        du = p2d[i, 0] - cx
        dv = p2d[i, 1] - cy
        rows.append((f * RE[0] - du * RE[2]) / zi)
        rhs.append(p2d[i, 0] - (f * Y0[i, 0] / zi + cx))
        rows.append((f * RE[1] - dv * RE[2]) / zi)
        rhs.append(p2d[i, 1] - (f * Y0[i, 1] / zi + cy))
    A = np.asarray(rows)
    b = np.asarray(rhs)

    if 2 * usable.size < ke:
        # underdetermined: damp toward neutral in sigma-whitened coordinates
        ridge = np.diag(np.sqrt(UNDERDETERMINED_RIDGE) / model.expr_sigma)
        A = np.vstack([A, ridge])
        b = np.concatenate([b, np.zeros(ke)])

    bound = EXPRESSION_BOUND_SIGMAS * model.expr_sigma
    problem = BoundedLLSProblem(design=A, rhs=b, lower=-bound, upper=bound)
    gamma = solve_bounded_lls(problem)
    return ExpressionCoeffs(gamma=gamma)


def save_expression(gamma: ExpressionCoeffs, visible: Sequence[int], path) -> None:
    payload = {"gamma": [float(g) for g in gamma.gamma],
               "visible": [int(i) for i in visible]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
