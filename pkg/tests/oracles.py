"""Independent reference implementations used to check the fast paths.

Everything here is written straight off the definitions (loops, dense
algebra, exhaustive sweeps) and deliberately avoids the package's own
computational routes.
"""
import math

import numpy as np


def naive_synthesis(mean, shape_basis, expr_basis, alpha, gamma):
    """Column-at-a-time mean + W_S a + W_E g (no matrix product call)."""
    out = np.array(mean, dtype=np.float64, copy=True)
    for k in range(len(alpha)):
        out += shape_basis[:, k] * alpha[k]
    for k in range(len(gamma)):
        out += expr_basis[:, k] * gamma[k]
    return out


def project_homogeneous(points, R, t, focal, pp):
    """3x4 projection-matrix route: K [R|t] X, then divide."""
    K = np.array([[focal, 0.0, pp[0]], [0.0, focal, pp[1]], [0.0, 0.0, 1.0]])
    P = K @ np.hstack([R, t.reshape(3, 1)])
    X = np.hstack([points, np.ones((len(points), 1))])
    h = X @ P.T
    return h[:, :2] / h[:, 2:3], h[:, 2]


def pixel_count_metrics(pred, gt):
    """Double-loop IOU / global accuracy / recall counts."""
    inter = union = agree = gt_count = covered = 0
    H, W = pred.shape
    for y in range(H):
        for x in range(W):
            p = bool(pred[y, x])
            g = bool(gt[y, x])
            if p and g:
                inter += 1
                covered += 1
            if p or g:
                union += 1
            if p == g:
                agree += 1
            if g:
                gt_count += 1
    iou = 1.0 if union == 0 else inter / union
    acc = agree / (H * W)
    recall = None if gt_count == 0 else covered / gt_count
    return iou, acc, recall


def rasterize_reference(tri_pts, canvas_w, canvas_h):
    """Full-canvas scan of one triangle with the top-left fill rule."""
    (x0, y0), (x1, y1), (x2, y2) = [(float(p[0]), float(p[1])) for p in tri_pts]
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    covered = np.zeros((canvas_h, canvas_w), dtype=bool)
    if area == 0.0:
        return covered
    if area < 0.0:
        x1, y1, x2, y2 = x2, y2, x1, y1

    def edge(ax, ay, bx, by, px, py):
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)

    def top_left(ax, ay, bx, by):
        return (ay == by and bx > ax) or (by < ay)

    for py in range(canvas_h):
        for px in range(canvas_w):
            cx, cy = px + 0.5, py + 0.5
            w0 = edge(x1, y1, x2, y2, cx, cy)
            w1 = edge(x2, y2, x0, y0, cx, cy)
            w2 = edge(x0, y0, x1, y1, cx, cy)
            ok0 = w0 > 0 or (w0 == 0 and top_left(x1, y1, x2, y2))
            ok1 = w1 > 0 or (w1 == 0 and top_left(x2, y2, x0, y0))
            ok2 = w2 > 0 or (w2 == 0 and top_left(x0, y0, x1, y1))
            covered[py, px] = ok0 and ok1 and ok2
    return covered


def convex_hull(points):
    """Monotone-chain hull; returns vertices counter-clockwise."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def point_in_hull(point, hull, slack=1e-9):
    if len(hull) < 3:
        return False
    x, y = point
    for i in range(len(hull)):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % len(hull)]
        if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < -slack:
            return False
    return True


def dense_poisson_solve(guide, target, domain):
    """Assemble the full interior Laplacian and solve it directly."""
    H, W = domain.shape
    idx = -np.ones((H, W), dtype=int)
    ys, xs = np.nonzero(domain)
    for k, (y, x) in enumerate(zip(ys, xs)):
        idx[y, x] = k
    m = len(ys)
    A = np.zeros((m, m))
    b = np.zeros(m)
    for k, (y, x) in enumerate(zip(ys, xs)):
        A[k, k] = 4.0
        b[k] = 4.0 * guide[y, x]
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = y + dy, x + dx
            b[k] -= guide[ny, nx]
            if domain[ny, nx]:
                A[k, idx[ny, nx]] -= 1.0
            else:
                b[k] += target[ny, nx]
    x_sol = np.linalg.solve(A, b)
    out = target.astype(np.float64).copy()
    out[ys, xs] = x_sol
    return out


def grid_min_objective(A, b, lo, hi, points=41, chunk=200_000):
    """Exact minimum of ||Ax - b||^2 over the full lattice.

    The first K-1 axes are enumerated; the last axis is reduced analytically
    (the objective is a convex quadratic along it, so the lattice minimum sits
    at one of the grid points adjacent to the continuous vertex).
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    K = A.shape[1]
    Q = A.T @ A
    c = A.T @ b
    const = float(b @ b)
    axes = [np.linspace(lo[j], hi[j], points) for j in range(K)]
    if K == 1:
        vals = [float(np.sum((A[:, 0] * x - b) ** 2)) for x in axes[0]]
        return min(vals)

    last = axes[-1]
    q_ll = Q[-1, -1]
    mesh = np.meshgrid(*axes[:-1], indexing="ij")
    X = np.stack([m.reshape(-1) for m in mesh], axis=1)
    n_rows = X.shape[0]
    best = math.inf
    Qhh = Q[:-1, :-1]
    Qhl = Q[:-1, -1]
    ch = c[:-1]
    cl = c[-1]
    step = last[1] - last[0] if points > 1 else 1.0
    for start in range(0, n_rows, chunk):
        Xc = X[start:start + chunk]
        Cc = np.einsum("ij,jk,ik->i", Xc, Qhh, Xc) - 2.0 * (Xc @ ch) + const
        Lc = 2.0 * (Xc @ Qhl - cl)
        if q_ll > 0:
            vtx = -Lc / (2.0 * q_ll)
            base = np.clip(np.rint((vtx - last[0]) / step), 0, points - 1).astype(int)
            cand = np.stack([np.clip(base + d, 0, points - 1) for d in (-1, 0, 1)])
            vals = q_ll * last[cand] ** 2 + Lc[None, :] * last[cand] + Cc[None, :]
            best = min(best, float(vals.min()))
        else:
            for xv in (last[0], last[-1]):
                best = min(best, float((q_ll * xv * xv + Lc * xv + Cc).min()))
    return best


def grid_min_bruteforce(A, b, lo, hi, points=41):
    """Literal lattice enumeration; only viable for K <= 2."""
    from itertools import product

    K = A.shape[1]
    axes = [np.linspace(lo[j], hi[j], points) for j in range(K)]
    best = math.inf
    for combo in product(*axes):
        x = np.asarray(combo)
        r = A @ x - b
        best = min(best, float(r @ r))
    return best


def sweep_verification_oracle(scores, labels, folds):
    """Exhaustive threshold sweep for EER/accuracy/nAUC (loop style)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)

    def roc(sc, lb):
        pos = int(lb.sum())
        neg = int((~lb).sum())
        pts = [(0.0, 0.0)]
        for t in sorted(set(sc.tolist()), reverse=True):
            pred = sc >= t
            tp = int((pred & lb).sum())
            fp = int((pred & ~lb).sum())
            pts.append((fp / neg, tp / pos))
        return pts

    def auc(pts):
        total = 0.0
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            total += 0.5 * (y0 + y1) * (x1 - x0)
        return 100.0 * total

    def eer100(pts):
        prev = None
        for far, tpr in pts:
            frr = 1.0 - tpr
            if far >= frr:
                if prev is None:
                    return 100.0 * (1.0 - far)
                far0, frr0 = prev
                denom = (far - far0) - (frr - frr0)
                tt = (frr0 - far0) / denom if denom != 0 else 0.0
                return 100.0 * (1.0 - (far0 + tt * (far - far0)))
            prev = (far, frr)
        return 0.0

    pts_all = roc(scores, labels)

    fold_acc = []
    fold_nauc = []
    for start, end in folds:
        test = np.zeros(len(scores), dtype=bool)
        test[start:end] = True
        tr_s, tr_l = scores[~test], labels[~test]
        distinct = sorted(set(tr_s.tolist()))
        cands = [distinct[0] - 1.0]
        for lo, hi in zip(distinct, distinct[1:]):
            cands.append((lo + hi) / 2.0)
        cands.append(distinct[-1] + 1.0)
        best_t, best_a = None, -1.0
        for t in cands:
            a = float(np.mean((tr_s >= t) == tr_l))
            if a > best_a:
                best_a, best_t = a, t
        fold_acc.append(float(np.mean((scores[test] >= best_t) == labels[test])) * 100.0)
        fold_nauc.append(auc(roc(scores[test], labels[test])))

    def sample_std(v):
        if len(v) < 2:
            return 0.0
        mean = sum(v) / len(v)
        return math.sqrt(sum((x - mean) ** 2 for x in v) / (len(v) - 1))

    return {
        "eer100": eer100(pts_all),
        "acc_mean": sum(fold_acc) / len(fold_acc),
        "acc_std": sample_std(fold_acc),
        "nauc_mean": sum(fold_nauc) / len(fold_nauc),
        "nauc_std": sample_std(fold_nauc),
        "nauc_global": auc(pts_all),
    }
