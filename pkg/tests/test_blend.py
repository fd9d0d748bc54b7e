import numpy as np
import pytest

from faceswap3d.blend import BlendRequest, poisson_blend, poisson_blend_float
from faceswap3d.render import RenderedLayer
from faceswap3d.segment import Mask
from oracles import dense_poisson_solve


def layer_from(color, coverage):
    return RenderedLayer(color=np.asarray(color, dtype=np.float64),
                         coverage=np.asarray(coverage, dtype=bool),
                         depth=np.where(coverage, 1.0, np.inf))


def full_region(h, w):
    return Mask(np.ones((h, w), dtype=bool))


def interior_domain(coverage):
    dom = coverage.copy()
    dom[0, :] = dom[-1, :] = dom[:, 0] = dom[:, -1] = False
    return dom


def laplacian_residual(out, guide, dom):
    lap = lambda A: (4 * A[1:-1, 1:-1] - A[:-2, 1:-1] - A[2:, 1:-1]
                     - A[1:-1, :-2] - A[1:-1, 2:])
    deep = (dom[1:-1, 1:-1] & dom[:-2, 1:-1] & dom[2:, 1:-1]
            & dom[1:-1, :-2] & dom[1:-1, 2:])
    worst = 0.0
    for ch in range(3):
        r = np.abs(lap(out[..., ch]) - lap(guide[..., ch]))[deep]
        if r.size:
            worst = max(worst, float(r.max()))
    return worst


class TestPoisson:
    def test_identity_is_exact(self):
        r = np.random.default_rng(1)
        tgt = r.integers(0, 256, (12, 12, 3)).astype(np.uint8)
        req = BlendRequest(foreground=layer_from(tgt.astype(float),
                                                 np.ones((12, 12), bool)),
                           target=tgt, region=full_region(12, 12))
        out, info = poisson_blend_float(req)
        assert np.abs(out - tgt).max() <= 1e-6
        assert info["iterations"] == [0, 0, 0]

    def test_constant_offset_absorbed(self):
        r = np.random.default_rng(2)
        tgt = r.integers(0, 256, (12, 12, 3)).astype(np.uint8)
        fg = tgt.astype(float) + 13.0
        req = BlendRequest(foreground=layer_from(fg, np.ones((12, 12), bool)),
                           target=tgt, region=full_region(12, 12))
        out, _ = poisson_blend_float(req)
        assert np.abs(out - tgt).max() <= 1e-6

    def test_matches_dense_direct_solve_8x8_domain(self):
        r = np.random.default_rng(3)
        H = W = 12
        tgt = r.integers(0, 256, (H, W, 3)).astype(np.uint8)
        fg = r.uniform(0, 255, (H, W, 3))
        cov = np.zeros((H, W), bool)
        cov[2:10, 2:10] = True  # 8x8 blend domain
        req = BlendRequest(foreground=layer_from(np.where(cov[..., None], fg, 0), cov),
                           target=tgt, region=full_region(H, W))
        out, _ = poisson_blend_float(req)
        dom = interior_domain(cov)
        for ch in range(3):
            guide = np.where(cov, fg[..., ch], tgt[..., ch].astype(float))
            want = dense_poisson_solve(guide, tgt[..., ch].astype(float), dom)
            assert np.abs(out[..., ch] - want).max() < 1e-6

    def test_interior_laplacian_residual(self):
        r = np.random.default_rng(4)
        H = W = 24
        tgt = r.integers(0, 256, (H, W, 3)).astype(np.uint8)
        fg = r.uniform(0, 255, (H, W, 3))
        cov = np.zeros((H, W), bool)
        cov[4:20, 4:20] = True
        req = BlendRequest(foreground=layer_from(np.where(cov[..., None], fg, 0), cov),
                           target=tgt, region=full_region(H, W))
        out, _ = poisson_blend_float(req)
        guide = np.where(cov[..., None], fg, tgt.astype(float))
        assert laplacian_residual(out, guide, interior_domain(cov)) < 1e-6

    def test_maximum_principle_for_correction(self):
        r = np.random.default_rng(5)
        H = W = 16
        tgt = r.integers(0, 256, (H, W, 3)).astype(np.uint8)
        fg = r.uniform(0, 255, (H, W, 3))
        cov = np.zeros((H, W), bool)
        cov[3:13, 3:13] = True
        req = BlendRequest(foreground=layer_from(np.where(cov[..., None], fg, 0), cov),
                           target=tgt, region=full_region(H, W))
        out, _ = poisson_blend_float(req)
        dom = interior_domain(cov)
        guide = np.where(cov[..., None], fg, tgt.astype(float))
        h = out - guide  # harmonic correction, boundary values tgt - guide
        boundary = np.zeros((H, W), bool)
        ys, xs = np.nonzero(dom)
        for y, x in zip(ys, xs):
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                if not dom[y + dy, x + dx]:
                    boundary[y + dy, x + dx] = True
        slack = 1e-5
        for ch in range(3):
            bvals = (tgt.astype(float) - guide)[..., ch][boundary]
            inner = h[..., ch][dom]
            assert inner.max() <= bvals.max() + slack
            assert inner.min() >= bvals.min() - slack

    def test_idempotent_to_quantization(self):
        r = np.random.default_rng(6)
        H = W = 16
        tgt = r.integers(0, 256, (H, W, 3)).astype(np.uint8)
        fg = r.uniform(0, 255, (H, W, 3))
        cov = np.zeros((H, W), bool)
        cov[3:13, 3:13] = True
        req = BlendRequest(foreground=layer_from(np.where(cov[..., None], fg, 0), cov),
                           target=tgt, region=full_region(H, W))
        once = poisson_blend(req)
        req2 = BlendRequest(foreground=layer_from(once.astype(float), cov),
                            target=once, region=full_region(H, W))
        twice = poisson_blend(req2)
        assert np.abs(twice.astype(int) - once.astype(int)).max() <= 1

    def test_empty_domain_warns_and_returns_target(self):
        tgt = np.full((8, 8, 3), 50, dtype=np.uint8)
        req = BlendRequest(foreground=layer_from(np.zeros((8, 8, 3)),
                                                 np.zeros((8, 8), bool)),
                           target=tgt, region=full_region(8, 8))
        with pytest.warns(UserWarning):
            out, info = poisson_blend_float(req)
        assert np.array_equal(out, tgt.astype(float))
        assert info["domain_px"] == 0

    def test_border_touching_coverage_is_trimmed(self):
        r = np.random.default_rng(7)
        tgt = r.integers(0, 256, (10, 10, 3)).astype(np.uint8)
        cov = np.ones((10, 10), bool)  # touches every border
        fg = r.uniform(0, 255, (10, 10, 3))
        req = BlendRequest(foreground=layer_from(fg, cov), target=tgt,
                           region=full_region(10, 10))
        out, info = poisson_blend_float(req)
        assert info["domain_px"] == 8 * 8
        # border rows stay exactly at the target
        assert np.array_equal(out[0], tgt[0].astype(float))
        assert np.array_equal(out[-1], tgt[-1].astype(float))

    def test_mixed_gradients_flag_runs(self):
        r = np.random.default_rng(8)
        tgt = r.integers(0, 256, (12, 12, 3)).astype(np.uint8)
        fg = r.uniform(0, 255, (12, 12, 3))
        cov = np.zeros((12, 12), bool)
        cov[2:10, 2:10] = True
        req = BlendRequest(foreground=layer_from(np.where(cov[..., None], fg, 0), cov),
                           target=tgt, region=full_region(12, 12))
        out = poisson_blend(req, mixed=True)
        assert out.shape == tgt.shape

    def test_size_mismatch_rejected(self):
        from faceswap3d.errors import InvalidArgumentError

        with pytest.raises(InvalidArgumentError):
            BlendRequest(foreground=layer_from(np.zeros((8, 8, 3)),
                                               np.zeros((8, 8), bool)),
                         target=np.zeros((9, 8, 3), dtype=np.uint8),
                         region=full_region(8, 8))
