"""Gradient-domain compositing of the rendered face into the target photo.

Inside the blend domain the output matches the foreground's discrete
Laplacian with Dirichlet boundary values taken from the target (seamless
cloning, plain guidance field). Each channel is a symmetric positive definite
5-point system solved by conjugate gradients.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .render import RenderedLayer, quantize
from .segment import Mask

CG_RELATIVE_TOL = 1e-8
# On 8-bit-scale data the relative test alone can stop with ~1e-4 absolute
# residuals; the infinity-norm check keeps the interior equations tight.
CG_ABSOLUTE_TOL = 1e-7
CG_MAX_ITERATIONS = 10_000


@dataclass
class BlendRequest:
    foreground: RenderedLayer
    target: np.ndarray  # (H, W, 3) uint8
    region: Mask  # blend domain = coverage & region, border excluded

    def __post_init__(self):
        h, w = self.region.labels.shape
        if self.foreground.color.shape[:2] != (h, w) or self.target.shape[:2] != (h, w):
            raise InvalidArgumentError("foreground, target, and region sizes differ")


def _domain(req: BlendRequest) -> np.ndarray:
    dom = req.foreground.coverage & req.region.labels
    # pixels on the image border become boundary conditions, not unknowns
    dom[0, :] = False
    dom[-1, :] = False
    dom[:, 0] = False
    dom[:, -1] = False
    return dom


def _cg(b: np.ndarray, x0: np.ndarray, nbr_ids: np.ndarray):
    """Conjugate gradients on 4x - sum(x[nbr]) = b, warm-started at x0."""
    x = x0.copy()
    out = np.empty_like(x)
    kernels.laplacian_apply(x, nbr_ids, out)
    r = b - out
    bnorm = float(np.sqrt(np.dot(b, b)))
    if bnorm == 0.0:
        bnorm = 1.0
    p = r.copy()
    rr = float(np.dot(r, r))
    it = 0
    while (np.sqrt(rr) > CG_RELATIVE_TOL * bnorm
           or float(np.max(np.abs(r), initial=0.0)) > CG_ABSOLUTE_TOL) \
            and it < CG_MAX_ITERATIONS:
        kernels.laplacian_apply(p, nbr_ids, out)
        alpha = rr / float(np.dot(p, out))
        x = x + alpha * p
        r = r - alpha * out
        rr_new = float(np.dot(r, r))
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return x, it, float(np.sqrt(rr) / bnorm)


def poisson_blend_float(req: BlendRequest, mixed: bool = False):
    """Float-valued blend result plus solver metadata."""
    H, W = req.region.labels.shape
    dom = _domain(req)
    tgt = np.asarray(req.target, dtype=np.float64)
    m = int(np.count_nonzero(dom))
    if m == 0:
        warnings.warn("empty blend domain; returning the target unchanged")
        return tgt.copy(), {"domain_px": 0, "iterations": [], "residual": []}

    flat_dom = dom.reshape(-1)
    ids = np.full(H * W, -1, dtype=np.int32)
    ids[flat_dom] = np.arange(m, dtype=np.int32)
    qy, qx = np.nonzero(dom)
    qflat = qy * W + qx
    # neighbor order: up, down, left, right (all exist; border is excluded)
    nbr_flat = np.stack([qflat - W, qflat + W, qflat - 1, qflat + 1], axis=1)
    nbr_ids = np.ascontiguousarray(ids[nbr_flat], dtype=np.int32)
    nbr_in = nbr_ids >= 0

    cov = req.foreground.coverage
    out_img = tgt.copy()
    info = {"domain_px": m, "iterations": [], "residual": []}
    for ch in range(3):
        tf = np.ascontiguousarray(tgt[..., ch]).reshape(-1)
        gf = np.where(cov, req.foreground.color[..., ch], tgt[..., ch]).reshape(-1)
        if mixed:
            # per-edge choice of the stronger gradient (fg vs target)
            b = np.zeros(m)
            for k in range(4):
                gd = gf[qflat] - gf[nbr_flat[:, k]]
                td = tf[qflat] - tf[nbr_flat[:, k]]
                grad = np.where(np.abs(td) > np.abs(gd), td, gd)
                b = b + grad + np.where(nbr_in[:, k], 0.0, tf[nbr_flat[:, k]])
        else:
            # grouped so g == t (up to a constant) gives a bitwise-zero residual
            b = 4.0 * gf[qflat]
            for k in range(4):
                vals = gf[nbr_flat[:, k]]
                vals = np.where(nbr_in[:, k], vals, vals - tf[nbr_flat[:, k]])
                b = b - vals
        x, it, res = _cg(b, tf[qflat], nbr_ids)
        flat = out_img[..., ch].reshape(-1)
        flat[qflat] = x
        out_img[..., ch] = flat.reshape(H, W)
        info["iterations"].append(it)
        info["residual"].append(res)
    return out_img, info


def poisson_blend(req: BlendRequest, mixed: bool = False) -> np.ndarray:
    """8-bit blend output (see poisson_blend_float for the raw solution)."""
    out, _ = poisson_blend_float(req, mixed=mixed)
    return quantize(out)
