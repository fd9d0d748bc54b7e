"""Texture sampling and software mesh rendering.

Per-vertex colors are pulled from the source photo by bilinear interpolation
at the vertex projections (restricted to the segmented face), copied across
the shared topology, and rasterized with a z-buffer and the top-left fill
rule. Color math stays in float; quantization rounds half-to-even.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image as PILImage

from . import kernels
from .errors import InvalidArgumentError
from .model import Vertices
from .pose import CameraIntrinsics, Pose
from .segment import Mask


@dataclass
class RenderedLayer:
    color: np.ndarray  # (H, W, 3) float64, defined where coverage
    coverage: np.ndarray  # (H, W) bool
    depth: np.ndarray  # (H, W) float64, +inf where uncovered

    @property
    def size(self) -> Tuple[int, int]:
        return self.color.shape[1], self.color.shape[0]


def load_image(path) -> np.ndarray:
    return np.asarray(PILImage.open(path).convert("RGB"))


def save_image(image: np.ndarray, path) -> None:
    PILImage.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def quantize(channel_float: np.ndarray) -> np.ndarray:
    """Round half-to-even and clip to 8-bit range."""
    return np.clip(np.rint(channel_float), 0, 255).astype(np.uint8)


def _project_valid(coords: np.ndarray, pose: Pose, cam: CameraIntrinsics):
    Y = coords @ pose.rotation.T + pose.translation
    z = Y[:, 2]
    ok = z > 0.0
    safe = np.where(ok, z, 1.0)
    uv = np.empty((coords.shape[0], 2))
    uv[:, 0] = cam.focal * Y[:, 0] / safe + cam.principal_point[0]
    uv[:, 1] = cam.focal * Y[:, 1] / safe + cam.principal_point[1]
    return uv, np.where(ok, z, 0.0), ok


def sample_vertex_colors(image: np.ndarray, vertices: Vertices, pose: Pose,
                         cam: CameraIntrinsics, mask: Mask):
    """Bilinear colors at the vertex projections; returns (colors, sampled).

    A vertex is sampled when it faces the camera, projects inside the image,
    and lands on a mask-positive pixel. Bilinear taps falling on mask-negative
    pixels are dropped and the remaining weights renormalized, which equals
    plain bilinear interpolation whenever all four taps are valid.
    """
    if vertices.normals is None:
        raise InvalidArgumentError("vertices carry no normals")
    img = np.asarray(image, dtype=np.float64)
    H, W = img.shape[:2]
    if mask.labels.shape != (H, W):
        raise InvalidArgumentError("mask dimensions do not match the image")

    uv, _, in_front = _project_valid(vertices.coords, pose, cam)
    facing = (vertices.normals @ pose.rotation.T)[:, 2] < 0.0
    inside = (uv[:, 0] >= 0.0) & (uv[:, 0] < W) & (uv[:, 1] >= 0.0) & (uv[:, 1] < H)
    candidate = in_front & facing & inside

    px = np.clip(np.floor(uv[:, 0]).astype(np.int64), 0, W - 1)
    py = np.clip(np.floor(uv[:, 1]).astype(np.int64), 0, H - 1)
    on_mask = mask.labels[py, px]
    candidate &= on_mask

    colors = np.zeros((vertices.count, 3))
    sampled = np.zeros(vertices.count, dtype=bool)
    if candidate.any():
        gx = np.ascontiguousarray(uv[candidate, 0] - 0.5)
        gy = np.ascontiguousarray(uv[candidate, 1] - 0.5)
        valid = mask.labels.astype(np.uint8)
        acc, wsum = kernels.bilinear_sample(np.ascontiguousarray(img), gx, gy,
                                            np.ascontiguousarray(valid))
        good = wsum > 1e-12
        out = np.zeros_like(acc)
        out[good] = acc[good] / wsum[good, None]
        cand_idx = np.nonzero(candidate)[0]
        colors[cand_idx[good]] = out[good]
        sampled[cand_idx[good]] = True
    return colors, sampled


def transfer_colors(source_colors: np.ndarray, source_sampled: np.ndarray,
                    target_count: int):
    """Copy vertex colors across the shared topology (index i -> index i)."""
    if source_colors.shape[0] != target_count or source_sampled.shape[0] != target_count:
        raise InvalidArgumentError(
            f"vertex count mismatch: source {source_colors.shape[0]}, target {target_count}")
    return source_colors.copy(), source_sampled.copy()


def render_mesh(vertices: Vertices, triangles: np.ndarray, pose: Pose,
                cam: CameraIntrinsics, canvas_size: Tuple[int, int],
                seg: Mask) -> RenderedLayer:
    """Z-buffered rasterization of the colored mesh, masked by the segmentation.

    Triangles touching an unsampled vertex are skipped; back faces are culled
    by signed screen area; degenerate triangles are dropped silently.
    """
    W, H = canvas_size
    if seg.labels.shape != (H, W):
        raise InvalidArgumentError("segmentation mask does not match the canvas")
    if vertices.colors is None:
        raise InvalidArgumentError("vertices carry no colors to render")
    sampled = vertices.sampled
    if sampled is None:
        sampled = np.ones(vertices.count, dtype=bool)

    uv, depth, in_front = _project_valid(vertices.coords, pose, cam)
    valid = (sampled & in_front).astype(np.uint8)

    zbuf = np.full((H, W), np.inf)
    color = np.zeros((H, W, 3))
    cover = np.zeros((H, W), dtype=np.uint8)
    kernels.raster_triangles(np.ascontiguousarray(triangles, dtype=np.int32),
                             np.ascontiguousarray(uv),
                             np.ascontiguousarray(depth),
                             np.ascontiguousarray(vertices.colors, dtype=np.float64),
                             valid, zbuf, color, cover, True)

    coverage = cover.astype(bool) & seg.labels
    depth_out = np.where(coverage, zbuf, np.inf)
    color[~coverage] = 0.0
    return RenderedLayer(color=color, coverage=coverage, depth=depth_out)


def composite_paste(layer: RenderedLayer, target_image: np.ndarray) -> np.ndarray:
    """No-blend composite: covered pixels replace the target."""
    out = np.asarray(target_image, dtype=np.uint8).copy()
    out[layer.coverage] = quantize(layer.color[layer.coverage])
    return out


def save_coverage_png(layer: RenderedLayer, path) -> None:
    arr = np.where(layer.coverage, 255, 0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(path, format="PNG")


def save_depth_png(layer: RenderedLayer, png_path, json_path) -> None:
    """Depth normalized to 16 bits over the covered pixels, range in JSON."""
    cov = layer.coverage
    if cov.any():
        dmin = float(layer.depth[cov].min())
        dmax = float(layer.depth[cov].max())
    else:
        dmin = dmax = 0.0
    span = (dmax - dmin) or 1.0
    norm = np.zeros(layer.depth.shape, dtype=np.uint16)
    norm[cov] = np.clip(np.rint((layer.depth[cov] - dmin) / span * 65535), 0, 65535).astype(np.uint16)
    PILImage.fromarray(norm).save(png_path, format="PNG")
    Path(json_path).write_text(json.dumps({"min": dmin, "max": dmax}) + "\n", encoding="utf-8")
