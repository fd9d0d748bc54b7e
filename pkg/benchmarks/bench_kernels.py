"""Benchmark the compiled kernels against the NumPy fallback.

Usage:  python benchmarks/bench_kernels.py [--repeats N]

Both backends produce bit-identical buffers (asserted here as a sanity
check); the point of the extension is purely speed on the hot loops.
"""
import argparse
import time

import numpy as np

from faceswap3d import kernels
from faceswap3d.model import generate_synthetic_model, synthesize_shape
from faceswap3d.pose import Pose, default_intrinsics


def timer(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_raster(backend, n_vertices, size, repeats):
    model, _ = generate_synthetic_model(1, n_vertices=n_vertices)
    verts = synthesize_shape(model, None, None)
    cam = default_intrinsics(size, size)
    pose = Pose.identity(520.0)
    Y = verts.coords @ pose.rotation.T + pose.translation
    depth = np.ascontiguousarray(Y[:, 2])
    pts = np.ascontiguousarray(
        np.stack([cam.focal * Y[:, 0] / Y[:, 2] + cam.principal_point[0],
                  cam.focal * Y[:, 1] / Y[:, 2] + cam.principal_point[1]], axis=1))
    colors = np.ascontiguousarray(np.tile([128.0, 64.0, 32.0], (verts.count, 1)))
    valid = np.ones(verts.count, dtype=np.uint8)
    tris = np.ascontiguousarray(model.triangles, dtype=np.int32)

    def run():
        zbuf = np.full((size, size), np.inf)
        cbuf = np.zeros((size, size, 3))
        cov = np.zeros((size, size), dtype=np.uint8)
        backend.raster_triangles(tris, pts, depth, colors, valid, zbuf, cbuf, cov, True)
        return cov

    return timer(run, repeats)


def bench_bilinear(backend, n_points, repeats):
    r = np.random.default_rng(0)
    img = np.ascontiguousarray(r.uniform(0, 255, (256, 256, 3)))
    xs = np.ascontiguousarray(r.uniform(0, 255, n_points))
    ys = np.ascontiguousarray(r.uniform(0, 255, n_points))
    valid = np.ones((256, 256), dtype=np.uint8)
    return timer(lambda: backend.bilinear_sample(img, xs, ys, valid), repeats)


def bench_laplacian(backend, side, repeats):
    m = side * side
    ids = np.arange(m, dtype=np.int32).reshape(side, side)
    nbr = np.full((m, 4), -1, dtype=np.int32)
    nbr[:, 0].reshape(side, side)[1:, :] = ids[:-1, :]
    nbr[:, 1].reshape(side, side)[:-1, :] = ids[1:, :]
    nbr[:, 2].reshape(side, side)[:, 1:] = ids[:, :-1]
    nbr[:, 3].reshape(side, side)[:, :-1] = ids[:, 1:]
    nbr = np.ascontiguousarray(nbr)
    x = np.ascontiguousarray(np.random.default_rng(1).uniform(-1, 1, m))
    out = np.empty(m)

    def run():
        for _ in range(50):  # CG-like repeated application
            backend.laplacian_apply(x, nbr, out)
        return out

    return timer(run, repeats)


def bench_merge(backend, side, repeats):
    r = np.random.default_rng(2)
    img = r.uniform(0, 255, (side, side, 3))
    idx = np.arange(side * side).reshape(side, side)
    ea = np.concatenate([idx[:, :-1].reshape(-1), idx[:-1, :].reshape(-1)]).astype(np.int64)
    eb = np.concatenate([idx[:, 1:].reshape(-1), idx[1:, :].reshape(-1)]).astype(np.int64)
    flat = img.reshape(-1, 3)
    w = np.ascontiguousarray(np.sqrt(np.sum((flat[ea] - flat[eb]) ** 2, axis=1)))
    return timer(lambda: backend.merge_edges(side * side, ea, eb, w, 60.0), repeats)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if kernels.native_backend is None:
        raise SystemExit("compiled kernels unavailable; build with pip install -e .")

    rows = []
    cases = [
        ("raster 2k verts @ 256px", lambda b: bench_raster(b, 2000, 256, args.repeats)),
        ("raster 8k verts @ 512px", lambda b: bench_raster(b, 8000, 512, args.repeats)),
        ("bilinear 50k points", lambda b: bench_bilinear(b, 50_000, args.repeats)),
        ("laplacian 128^2 x50", lambda b: bench_laplacian(b, 128, args.repeats)),
        ("region merge 256^2", lambda b: bench_merge(b, 256, args.repeats)),
    ]
    for name, fn in cases:
        t_native, out_n = fn(kernels.native_backend)
        t_numpy, out_p = fn(kernels.numpy_backend)
        first_n = out_n[0] if isinstance(out_n, tuple) else out_n
        first_p = out_p[0] if isinstance(out_p, tuple) else out_p
        assert np.array_equal(first_n, first_p), f"backends disagree on {name}"
        rows.append((name, t_native * 1e3, t_numpy * 1e3, t_numpy / t_native))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'native ms':>10}  {'numpy ms':>10}  {'speedup':>8}")
    for name, tn, tp, s in rows:
        print(f"{name:<{width}}  {tn:>10.2f}  {tp:>10.2f}  {s:>7.1f}x")


if __name__ == "__main__":
    main()
