"""NumPy implementations of the hot kernels.

This is the fallback backend selected when the compiled extension is
unavailable. The compiled backend mirrors the arithmetic here expression by
expression (and is built with FP contraction disabled), so both backends
produce bit-identical buffers; tests assert that.
"""
import math

import numpy as np


def raster_triangles(tri, pts, depth, colors, valid, zbuf, color_buf, cover_buf, cull):
    """Z-buffered triangle fill with barycentric color interpolation.

    tri       : (T,3) int32 vertex indices
    pts       : (V,2) float64 screen coordinates (pixel (i,j) spans
                [i,i+1)x[j,j+1); its center is (i+0.5, j+0.5))
    depth     : (V,) float64 camera-frame z per vertex
    colors    : (V,3) float64 per-vertex color
    valid     : (V,) uint8, triangles touching a 0 vertex are skipped
    zbuf      : (H,W) float64, updated in place (smaller depth wins, strict <)
    color_buf : (H,W,3) float64, updated in place
    cover_buf : (H,W) uint8, set to 1 at pixels won by this call
    cull      : when true, skip triangles with nonnegative signed screen area
                (front faces of outward-wound meshes project negative here)

    Coverage follows the top-left fill rule evaluated at pixel centers.
    """
    H, W = zbuf.shape
    for t in range(tri.shape[0]):
        i0, i1, i2 = int(tri[t, 0]), int(tri[t, 1]), int(tri[t, 2])
        if not (valid[i0] and valid[i1] and valid[i2]):
            continue
        if depth[i0] <= 0.0 or depth[i1] <= 0.0 or depth[i2] <= 0.0:
            continue
        x0, y0 = pts[i0, 0], pts[i0, 1]
        x1, y1 = pts[i1, 0], pts[i1, 1]
        x2, y2 = pts[i2, 0], pts[i2, 1]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if cull and area >= 0.0:
            continue
        if area == 0.0:
            continue
        if area < 0.0:
            # normalize winding so edge functions are positive inside
            i1, i2 = i2, i1
            x1, y1, x2, y2 = x2, y2, x1, y1
            area = -area
        z0, z1, z2 = depth[i0], depth[i1], depth[i2]
        c0, c1, c2 = colors[i0], colors[i1], colors[i2]

        xmin = min(x0, x1, x2)
        xmax = max(x0, x1, x2)
        ymin = min(y0, y1, y2)
        ymax = max(y0, y1, y2)
        px_lo = max(0, int(math.ceil(xmin - 0.5)))
        px_hi = min(W - 1, int(math.floor(xmax - 0.5)))
        py_lo = max(0, int(math.ceil(ymin - 0.5)))
        py_hi = min(H - 1, int(math.floor(ymax - 0.5)))
        if px_lo > px_hi or py_lo > py_hi:
            continue

        tl0 = (y1 == y2 and x2 > x1) or (y2 < y1)
        tl1 = (y2 == y0 and x0 > x2) or (y0 < y2)
        tl2 = (y0 == y1 and x1 > x0) or (y1 < y0)

        xs = np.arange(px_lo, px_hi + 1, dtype=np.float64) + 0.5
        ys = np.arange(py_lo, py_hi + 1, dtype=np.float64) + 0.5
        pcx, pcy = np.meshgrid(xs, ys)
        w0 = (x2 - x1) * (pcy - y1) - (y2 - y1) * (pcx - x1)
        w1 = (x0 - x2) * (pcy - y2) - (y0 - y2) * (pcx - x2)
        w2 = (x1 - x0) * (pcy - y0) - (y1 - y0) * (pcx - x0)
        inside = (
            ((w0 > 0.0) | ((w0 == 0.0) & tl0))
            & ((w1 > 0.0) | ((w1 == 0.0) & tl1))
            & ((w2 > 0.0) | ((w2 == 0.0) & tl2))
        )
        if not inside.any():
            continue
        b0 = w0 / area
        b1 = w1 / area
        b2 = w2 / area
        z = (b0 * z0 + b1 * z1) + b2 * z2

        zwin = zbuf[py_lo : py_hi + 1, px_lo : px_hi + 1]
        cwin = color_buf[py_lo : py_hi + 1, px_lo : px_hi + 1]
        covwin = cover_buf[py_lo : py_hi + 1, px_lo : px_hi + 1]
        win = inside & (z < zwin)
        if not win.any():
            continue
        zwin[win] = z[win]
        for ch in range(3):
            val = (b0 * c0[ch] + b1 * c1[ch]) + b2 * c2[ch]
            cwin[..., ch][win] = val[win]
        covwin[win] = 1


def bilinear_sample(image, xs, ys, valid):
    """Accumulate masked bilinear taps at points (xs, ys).

    image : (H,W,3) float64, sample positions in a grid where integer
            coordinates sit on pixel centers
    valid : (H,W) uint8, taps on 0 pixels are dropped
    Returns (acc, wsum): weighted color sums and the total valid tap weight;
    the caller divides to renormalize (wsum is exactly 1 when all four taps
    are valid only up to rounding, hence the division).
    """
    H, W, C = image.shape
    M = xs.shape[0]
    acc = np.zeros((M, C), dtype=np.float64)
    wsum = np.zeros(M, dtype=np.float64)
    i0 = np.floor(xs).astype(np.int64)
    j0 = np.floor(ys).astype(np.int64)
    fx = xs - i0
    fy = ys - j0
    taps = (
        (i0, j0, (1.0 - fx) * (1.0 - fy)),
        (i0 + 1, j0, fx * (1.0 - fy)),
        (i0, j0 + 1, (1.0 - fx) * fy),
        (i0 + 1, j0 + 1, fx * fy),
    )
    for ti, tj, tw in taps:
        ok = (ti >= 0) & (ti < W) & (tj >= 0) & (tj < H)
        if not ok.any():
            continue
        ii = ti[ok]
        jj = tj[ok]
        ok2 = valid[jj, ii] != 0
        idx = np.nonzero(ok)[0][ok2]
        ii = ii[ok2]
        jj = jj[ok2]
        w = tw[idx]
        acc[idx] += w[:, None] * image[jj, ii]
        wsum[idx] += w
    return acc, wsum


def laplacian_apply(x, nbr, out):
    """5-point Laplacian restricted to the interior: out = 4*x - sum(x[nbr]).

    nbr is (M,4) int32; entries < 0 mark Dirichlet neighbors (dropped here,
    their contribution lives on the right-hand side).
    """
    s = np.zeros_like(x)
    for k in range(4):
        m = nbr[:, k] >= 0
        s[m] += x[nbr[m, k]]
    np.subtract(4.0 * x, s, out=out)


def merge_edges(n, ea, eb, w, tau):
    """Single-linkage merge: union endpoints of every edge with weight <= tau.

    Returns int32 labels where each pixel maps to the minimum pixel index of
    its component (canonical regardless of processing order).
    """
    parent = np.arange(n, dtype=np.int64)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    keep = np.nonzero(w <= tau)[0]
    for e in keep:
        ra = find(int(ea[e]))
        rb = find(int(eb[e]))
        if ra == rb:
            continue
        if ra < rb:
            parent[rb] = ra
        else:
            parent[ra] = rb
    labels = np.empty(n, dtype=np.int32)
    for i in range(n):
        labels[i] = find(i)
    return labels
