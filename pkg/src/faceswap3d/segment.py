"""Face-visibility masks: metrics, synthetic occlusions, and region proposals.

Masks are binary (face / not-face) and stored as single-channel 8-bit PNGs
holding only 0 and 255. Region maps are dense partitions used by the
labeling workflow; they are built by greedy color merging and stored as
16-bit PNGs with a JSON sidecar carrying the region count.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np
from PIL import Image as PILImage

from . import kernels
from .errors import InvalidArgumentError, UndefinedRecallError, UnknownRegionError
from .pose import CameraIntrinsics, Pose

DEFAULT_GRANULARITY = 0.05  # fraction of the max RGB distance; smaller = finer


@dataclass
class Mask:
    labels: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise InvalidArgumentError("mask must be 2-D")
        if self.labels.dtype != bool:
            self.labels = self.labels.astype(bool)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @classmethod
    def full(cls, width: int, height: int) -> "Mask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def empty(cls, width: int, height: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=bool))


@dataclass
class RegionMap:
    region_id: np.ndarray  # (H, W) int32, values 0..count-1 covering every pixel
    count: int

    def __post_init__(self):
        if self.region_id.ndim != 2:
            raise InvalidArgumentError("region map must be 2-D")

    @property
    def width(self) -> int:
        return self.region_id.shape[1]

    @property
    def height(self) -> int:
        return self.region_id.shape[0]


@dataclass
class Occluder:
    """Either a 3D mesh in model units or an alpha-matted image patch."""

    vertices: Optional[np.ndarray] = None  # (V, 3)
    triangles: Optional[np.ndarray] = None  # (T, 3) int
    color: Tuple[float, float, float] = (40.0, 40.0, 40.0)
    patch: Optional[np.ndarray] = None  # (h, w, 3) uint8-ish
    alpha: Optional[np.ndarray] = None  # (h, w) float in [0, 1]

    def __post_init__(self):
        if self.vertices is not None:
            if self.triangles is None:
                raise InvalidArgumentError("mesh occluder needs triangles")
            if self.triangles.size and int(self.triangles.max()) >= self.vertices.shape[0]:
                raise InvalidArgumentError("occluder triangle index out of range")
        if self.alpha is not None:
            if np.any(self.alpha < 0) or np.any(self.alpha > 1):
                raise InvalidArgumentError("alpha values must lie in [0, 1]")


def _check_dims(a: Mask, b: Mask):
    if a.labels.shape != b.labels.shape:
        raise InvalidArgumentError(
            f"mask dimensions differ: {a.labels.shape} vs {b.labels.shape}")


def iou(pred: Mask, gt: Mask) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    _check_dims(pred, gt)
    inter = int(np.count_nonzero(pred.labels & gt.labels))
    union = int(np.count_nonzero(pred.labels | gt.labels))
    if union == 0:
        return 1.0
    return inter / union


def global_accuracy(pred: Mask, gt: Mask) -> float:
    """Fraction of pixels with agreeing labels."""
    _check_dims(pred, gt)
    return int(np.count_nonzero(pred.labels == gt.labels)) / pred.labels.size


def ave_face_recall(pred: Mask, gt: Mask) -> float:
    """Fraction of ground-truth face pixels recovered by the prediction."""
    _check_dims(pred, gt)
    total = int(np.count_nonzero(gt.labels))
    if total == 0:
        raise UndefinedRecallError("ground-truth mask has no face pixels")
    return int(np.count_nonzero(pred.labels & gt.labels)) / total


def dataset_scores(pairs: Iterable[Tuple[Mask, Mask]]) -> dict:
    """Unweighted per-image means of the three segmentation metrics."""
    ious, accs, recalls = [], [], []
    for pred, gt in pairs:
        ious.append(iou(pred, gt))
        accs.append(global_accuracy(pred, gt))
        recalls.append(ave_face_recall(pred, gt))
    if not ious:
        raise InvalidArgumentError("no mask pairs to score")
    return {
        "mean_iou": float(np.mean(ious)),
        "global": float(np.mean(accs)),
        "ave_face": float(np.mean(recalls)),
        "images": len(ious),
    }


# --- synthetic occlusion augmentation -----------------------------------------

def _project_for_raster(vertices: np.ndarray, pose: Pose, cam: CameraIntrinsics):
    """Screen points + depths with a validity flag instead of hard errors."""
    Y = vertices @ pose.rotation.T + pose.translation
    z = Y[:, 2]
    ok = z > 0.0
    pts = np.zeros((vertices.shape[0], 2))
    zs = np.where(ok, z, 1.0)
    pts[:, 0] = cam.focal * Y[:, 0] / zs + cam.principal_point[0]
    pts[:, 1] = cam.focal * Y[:, 1] / zs + cam.principal_point[1]
    pts[~ok] = 0.0
    return pts, np.where(ok, z, 0.0), ok.astype(np.uint8)


def augment_mesh_occlusion(image: np.ndarray, mask: Mask, occ: Occluder,
                           face_vertices: np.ndarray, face_triangles: np.ndarray,
                           pose: Pose, cam: CameraIntrinsics):
    """Rasterize a CG occluder against the face depth buffer.

    Pixels where the occluder wins the z-test are painted into the image and
    removed from the face mask; an occluder fully behind the face changes
    nothing. The occluder is drawn double-sided.
    """
    if occ.vertices is None:
        raise InvalidArgumentError("mesh occluder required")
    H, W = mask.labels.shape
    zbuf = np.full((H, W), np.inf)
    colors = np.zeros((H, W, 3))
    scratch = np.zeros((H, W), dtype=np.uint8)

    pts, depth, ok = _project_for_raster(np.asarray(face_vertices, dtype=np.float64), pose, cam)
    vcol = np.zeros((face_vertices.shape[0], 3))
    kernels.raster_triangles(np.ascontiguousarray(face_triangles, dtype=np.int32),
                             pts, depth, vcol, ok, zbuf, colors, scratch, True)

    occ_pts, occ_depth, occ_ok = _project_for_raster(
        np.asarray(occ.vertices, dtype=np.float64), pose, cam)
    occ_col = np.tile(np.asarray(occ.color, dtype=np.float64), (occ.vertices.shape[0], 1))
    occ_cover = np.zeros((H, W), dtype=np.uint8)
    kernels.raster_triangles(np.ascontiguousarray(occ.triangles, dtype=np.int32),
                             occ_pts, occ_depth, occ_col, occ_ok,
                             zbuf, colors, occ_cover, False)

    hit = occ_cover.astype(bool)
    out_img = np.asarray(image).copy()
    out_img[hit] = np.clip(np.rint(colors[hit]), 0, 255).astype(out_img.dtype)
    out_mask = Mask(mask.labels & ~hit)
    return out_img, out_mask


def augment_hand_overlay(image: np.ndarray, mask: Mask, hand: Occluder,
                         position: Tuple[int, int]):
    """Alpha-composite an image patch; alpha > 0.5 pixels leave the mask.

    Out-of-bounds portions of the patch are clipped, not rejected.
    """
    if hand.patch is None or hand.alpha is None:
        raise InvalidArgumentError("hand occluder needs patch and alpha")
    H, W = mask.labels.shape
    ph, pw = hand.alpha.shape
    x0, y0 = int(position[0]), int(position[1])
    sx0, sy0 = max(0, -x0), max(0, -y0)
    dx0, dy0 = max(0, x0), max(0, y0)
    cw = min(pw - sx0, W - dx0)
    ch = min(ph - sy0, H - dy0)
    out_img = np.asarray(image).astype(np.float64, copy=True)
    out_mask = mask.labels.copy()
    if cw > 0 and ch > 0:
        patch = hand.patch[sy0:sy0 + ch, sx0:sx0 + cw].astype(np.float64)
        a = hand.alpha[sy0:sy0 + ch, sx0:sx0 + cw]
        window = out_img[dy0:dy0 + ch, dx0:dx0 + cw]
        out_img[dy0:dy0 + ch, dx0:dx0 + cw] = a[..., None] * patch + (1.0 - a[..., None]) * window
        out_mask[dy0:dy0 + ch, dx0:dx0 + cw] &= ~(a > 0.5)
    return np.clip(np.rint(out_img), 0, 255).astype(np.uint8), Mask(out_mask)


# --- region proposals ---------------------------------------------------------

def propose_regions(image: np.ndarray, granularity: float = DEFAULT_GRANULARITY) -> RegionMap:
    """Partition the image by merging 4-neighbors with similar colors.

    Two adjacent pixels join the same region when their RGB distance is at
    most granularity * (max distance). Smaller granularity values merge less
    and therefore produce finer partitions (region count is non-increasing in
    granularity).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    H, W = img.shape[:2]
    flat = img.reshape(-1, 3)
    idx = np.arange(H * W).reshape(H, W)

    ea_h = idx[:, :-1].reshape(-1)
    eb_h = idx[:, 1:].reshape(-1)
    ea_v = idx[:-1, :].reshape(-1)
    eb_v = idx[1:, :].reshape(-1)
    ea = np.concatenate([ea_h, ea_v]).astype(np.int64)
    eb = np.concatenate([eb_h, eb_v]).astype(np.int64)
    w = np.sqrt(np.sum((flat[ea] - flat[eb]) ** 2, axis=1))

    tau = float(granularity) * 255.0 * np.sqrt(3.0)
    labels = kernels.merge_edges(H * W, ea, eb, w, tau)
    # roots are component-minimum flat indices; sorting them yields ids in
    # row-major order of first appearance
    _, region = np.unique(labels, return_inverse=True)
    region = region.reshape(H, W).astype(np.int32)
    return RegionMap(region_id=region, count=int(region.max()) + 1)


def assemble_mask(regions: RegionMap, selected: Iterable[int]) -> Mask:
    """Mark a pixel as face iff its region id was selected."""
    sel = sorted(set(int(s) for s in selected))
    for s in sel:
        if s < 0 or s >= regions.count:
            raise UnknownRegionError(
                f"region id {s} outside 0..{regions.count - 1}")
    if not sel:
        return Mask.empty(regions.width, regions.height)
    picked = np.isin(regions.region_id, np.asarray(sel, dtype=np.int32))
    return Mask(picked)


def selection_from_mask(regions: RegionMap, mask: Mask) -> list:
    """Region ids whose pixels are all face pixels (inverse of assemble_mask)."""
    if mask.labels.shape != regions.region_id.shape:
        raise InvalidArgumentError("mask and region map dimensions differ")
    sel = []
    flat_r = regions.region_id.reshape(-1)
    flat_m = mask.labels.reshape(-1)
    totals = np.bincount(flat_r, minlength=regions.count)
    inside = np.bincount(flat_r[flat_m], minlength=regions.count)
    for rid in range(regions.count):
        if totals[rid] > 0 and inside[rid] == totals[rid]:
            sel.append(rid)
    return sel


def erode_cross(labels: np.ndarray) -> np.ndarray:
    """Binary erosion with the 4-neighbor cross; the border always erodes."""
    out = np.zeros_like(labels, dtype=bool)
    out[1:-1, 1:-1] = (labels[1:-1, 1:-1] & labels[:-2, 1:-1] & labels[2:, 1:-1]
                       & labels[1:-1, :-2] & labels[1:-1, 2:])
    return out


# --- PNG formats ---------------------------------------------------------------

def save_mask(mask: Mask, path) -> None:
    arr = np.where(mask.labels, 255, 0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(path, format="PNG")


def mask_png_bytes(mask: Mask) -> bytes:
    import io
    arr = np.where(mask.labels, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def load_mask(path) -> Mask:
    img = PILImage.open(path)
    if img.mode != "L":
        raise InvalidArgumentError(f"mask PNG must be single-channel, got {img.mode}")
    arr = np.asarray(img)
    bad = ~((arr == 0) | (arr == 255))
    if bad.any():
        y, x = np.nonzero(bad)
        raise InvalidArgumentError(
            f"mask holds value {arr[y[0], x[0]]} at ({x[0]}, {y[0]}); only 0/255 allowed")
    return Mask(arr == 255)


def save_region_map(regions: RegionMap, png_path, json_path=None) -> None:
    if regions.count > 65535:
        raise InvalidArgumentError("too many regions for 16-bit storage")
    arr = regions.region_id.astype(np.uint16)
    PILImage.fromarray(arr).save(png_path, format="PNG")
    if json_path is not None:
        meta = {"count": regions.count,
                "width": regions.width, "height": regions.height}
        Path(json_path).write_text(json.dumps(meta) + "\n", encoding="utf-8")


def load_region_map(png_path, json_path) -> RegionMap:
    img = PILImage.open(png_path)
    arr = np.asarray(img, dtype=np.int32)
    meta = json.loads(Path(json_path).read_text(encoding="utf-8"))
    count = int(meta["count"])
    if arr.size and int(arr.max()) >= count:
        raise InvalidArgumentError("region id exceeds declared count")
    return RegionMap(region_id=arr, count=count)
