# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels. Mirrors kernels._numpy expression for expression so the
two backends stay bit-identical (compiled with -ffp-contract=off)."""

from libc.math cimport ceil, floor

import numpy as np

cimport numpy as cnp

cnp.import_array()


def raster_triangles(cnp.int32_t[:, ::1] tri,
                     double[:, ::1] pts,
                     double[::1] depth,
                     double[:, ::1] colors,
                     cnp.uint8_t[::1] valid,
                     double[:, ::1] zbuf,
                     double[:, :, ::1] color_buf,
                     cnp.uint8_t[:, ::1] cover_buf,
                     bint cull):
    cdef Py_ssize_t H = zbuf.shape[0]
    cdef Py_ssize_t W = zbuf.shape[1]
    cdef Py_ssize_t T = tri.shape[0]
    cdef Py_ssize_t t, px, py, ch
    cdef Py_ssize_t i0, i1, i2, tmp
    cdef double x0, y0, x1, y1, x2, y2, area
    cdef double z0, z1, z2
    cdef double xmin, xmax, ymin, ymax
    cdef Py_ssize_t px_lo, px_hi, py_lo, py_hi
    cdef bint tl0, tl1, tl2
    cdef double pcx, pcy, w0, w1, w2, b0, b1, b2, z, val
    cdef bint inside

    for t in range(T):
        i0 = tri[t, 0]
        i1 = tri[t, 1]
        i2 = tri[t, 2]
        if not (valid[i0] and valid[i1] and valid[i2]):
            continue
        if depth[i0] <= 0.0 or depth[i1] <= 0.0 or depth[i2] <= 0.0:
            continue
        x0 = pts[i0, 0]
        y0 = pts[i0, 1]
        x1 = pts[i1, 0]
        y1 = pts[i1, 1]
        x2 = pts[i2, 0]
        y2 = pts[i2, 1]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if cull and area >= 0.0:
            continue
        if area == 0.0:
            continue
        if area < 0.0:
            tmp = i1
            i1 = i2
            i2 = tmp
            x1, y1, x2, y2 = x2, y2, x1, y1
            area = -area
        z0 = depth[i0]
        z1 = depth[i1]
        z2 = depth[i2]

        xmin = x0
        if x1 < xmin:
            xmin = x1
        if x2 < xmin:
            xmin = x2
        xmax = x0
        if x1 > xmax:
            xmax = x1
        if x2 > xmax:
            xmax = x2
        ymin = y0
        if y1 < ymin:
            ymin = y1
        if y2 < ymin:
            ymin = y2
        ymax = y0
        if y1 > ymax:
            ymax = y1
        if y2 > ymax:
            ymax = y2

        px_lo = <Py_ssize_t>ceil(xmin - 0.5)
        if px_lo < 0:
            px_lo = 0
        px_hi = <Py_ssize_t>floor(xmax - 0.5)
        if px_hi > W - 1:
            px_hi = W - 1
        py_lo = <Py_ssize_t>ceil(ymin - 0.5)
        if py_lo < 0:
            py_lo = 0
        py_hi = <Py_ssize_t>floor(ymax - 0.5)
        if py_hi > H - 1:
            py_hi = H - 1
        if px_lo > px_hi or py_lo > py_hi:
            continue

        tl0 = (y1 == y2 and x2 > x1) or (y2 < y1)
        tl1 = (y2 == y0 and x0 > x2) or (y0 < y2)
        tl2 = (y0 == y1 and x1 > x0) or (y1 < y0)

        for py in range(py_lo, py_hi + 1):
            pcy = py + 0.5
            for px in range(px_lo, px_hi + 1):
                pcx = px + 0.5
                w0 = (x2 - x1) * (pcy - y1) - (y2 - y1) * (pcx - x1)
                if not (w0 > 0.0 or (w0 == 0.0 and tl0)):
                    continue
                w1 = (x0 - x2) * (pcy - y2) - (y0 - y2) * (pcx - x2)
                if not (w1 > 0.0 or (w1 == 0.0 and tl1)):
                    continue
                w2 = (x1 - x0) * (pcy - y0) - (y1 - y0) * (pcx - x0)
                if not (w2 > 0.0 or (w2 == 0.0 and tl2)):
                    continue
                b0 = w0 / area
                b1 = w1 / area
                b2 = w2 / area
                z = (b0 * z0 + b1 * z1) + b2 * z2
                if z < zbuf[py, px]:
                    zbuf[py, px] = z
                    for ch in range(3):
                        val = (b0 * colors[i0, ch] + b1 * colors[i1, ch]) + b2 * colors[i2, ch]
                        color_buf[py, px, ch] = val
                    cover_buf[py, px] = 1


def bilinear_sample(double[:, :, ::1] image,
                    double[::1] xs,
                    double[::1] ys,
                    cnp.uint8_t[:, ::1] valid):
    cdef Py_ssize_t H = image.shape[0]
    cdef Py_ssize_t W = image.shape[1]
    cdef Py_ssize_t C = image.shape[2]
    cdef Py_ssize_t M = xs.shape[0]
    acc_arr = np.zeros((M, C), dtype=np.float64)
    wsum_arr = np.zeros(M, dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef double[::1] wsum = wsum_arr
    cdef Py_ssize_t m, c, k, ti, tj
    cdef Py_ssize_t i0, j0
    cdef double fx, fy, w

    for m in range(M):
        i0 = <Py_ssize_t>floor(xs[m])
        j0 = <Py_ssize_t>floor(ys[m])
        fx = xs[m] - i0
        fy = ys[m] - j0
        for k in range(4):
            if k == 0:
                ti = i0
                tj = j0
                w = (1.0 - fx) * (1.0 - fy)
            elif k == 1:
                ti = i0 + 1
                tj = j0
                w = fx * (1.0 - fy)
            elif k == 2:
                ti = i0
                tj = j0 + 1
                w = (1.0 - fx) * fy
            else:
                ti = i0 + 1
                tj = j0 + 1
                w = fx * fy
            if ti < 0 or ti >= W or tj < 0 or tj >= H:
                continue
            if valid[tj, ti] == 0:
                continue
            for c in range(C):
                acc[m, c] += w * image[tj, ti, c]
            wsum[m] += w
    return acc_arr, wsum_arr


def laplacian_apply(double[::1] x,
                    cnp.int32_t[:, ::1] nbr,
                    double[::1] out):
    cdef Py_ssize_t M = x.shape[0]
    cdef Py_ssize_t i, k
    cdef cnp.int32_t n
    cdef double s
    for i in range(M):
        s = 0.0
        for k in range(4):
            n = nbr[i, k]
            if n >= 0:
                s += x[n]
        out[i] = 4.0 * x[i] - s


def merge_edges(Py_ssize_t n,
                cnp.int64_t[::1] ea,
                cnp.int64_t[::1] eb,
                double[::1] w,
                double tau):
    parent_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = parent_arr
    labels_arr = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] labels = labels_arr
    cdef Py_ssize_t e, E = ea.shape[0]
    cdef cnp.int64_t ra, rb, i

    for e in range(E):
        if w[e] > tau:
            continue
        ra = ea[e]
        while parent[ra] != ra:
            parent[ra] = parent[parent[ra]]
            ra = parent[ra]
        rb = eb[e]
        while parent[rb] != rb:
            parent[rb] = parent[parent[rb]]
            rb = parent[rb]
        if ra == rb:
            continue
        if ra < rb:
            parent[rb] = ra
        else:
            parent[ra] = rb
    for i in range(n):
        ra = i
        while parent[ra] != ra:
            parent[ra] = parent[parent[ra]]
            ra = parent[ra]
        labels[i] = <cnp.int32_t>ra
    return labels_arr
