"""End-to-end swap: pose -> expression -> sample -> transfer -> render -> blend.

Every learned component is a file input: landmarks, masks, and shape
coefficients arrive alongside each image, so the geometric pipeline runs
standalone. Both sides are processed identically; only the final compositing
stage differs between blend modes.
"""
import json
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .blend import BlendRequest, poisson_blend_float
from .errors import StageError
from .evalharness import SwapPlan
from .expression import fit_expression, visible_landmarks
from .model import (
    LandmarkMapping,
    MorphableModel,
    ShapeCoeffs,
    Vertices,
    compute_vertex_normals,
    load_mapping,
    load_model,
    select_landmarks,
    synthesize_shape,
)
from .pose import default_intrinsics, estimate_pose, load_landmarks, matrix_to_rotvec
from .render import (
    composite_paste,
    load_image,
    quantize,
    render_mesh,
    sample_vertex_colors,
    save_image,
    transfer_colors,
)
from .segment import Mask, erode_cross, load_mask

GENERIC = "generic"
ESTIMATED = "estimated"
POISSON = "poisson"
PASTE = "paste"


@dataclass
class SideInputs:
    image: Path
    landmarks: Path
    mask: Optional[Path] = None
    alpha: Optional[Path] = None


@dataclass
class SwapOptions:
    shape: str = ESTIMATED  # generic forces alpha = 0
    segmentation: bool = True  # off forces a full-frame mask
    blend: str = POISSON
    mixed_gradients: bool = False
    focal: Optional[float] = None
    principal_point: Optional[tuple] = None
    seed: int = 0

    def ablation_row(self) -> str:
        shape = "Est. 3D" if self.shape == ESTIMATED else "Generic"
        if self.segmentation:
            return f"{shape}+Seg." if self.shape == ESTIMATED else "Seg."
        return shape


@dataclass
class SwapJob:
    source: SideInputs
    target: SideInputs
    model_path: Path
    mapping_path: Path
    options: SwapOptions = field(default_factory=SwapOptions)


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _load_alpha(path, model: MorphableModel) -> ShapeCoeffs:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    a = np.asarray(payload["alpha"], dtype=np.float64)
    if a.shape != (model.shape_dim,):
        raise ValueError(f"alpha file holds {a.size} values, model expects {model.shape_dim}")
    return ShapeCoeffs(alpha=a)


def _pose_payload(pose, cam) -> dict:
    return {
        "rodrigues": [float(x) for x in matrix_to_rotvec(pose.rotation)],
        "t": [float(x) for x in pose.translation],
        "focal": float(cam.focal),
        "pp": [float(x) for x in cam.principal_point],
    }


def run_swap(job: SwapJob, model: Optional[MorphableModel] = None,
             mapping: Optional[LandmarkMapping] = None):
    """Execute one swap; returns (output image, metadata dict).

    Any failure is re-raised as StageError carrying the stage name, so batch
    runs can record where a job died.
    """
    timings: dict = {}
    opts = job.options
    meta: dict = {"options": {
        "shape": opts.shape,
        "segmentation": "on" if opts.segmentation else "off",
        "blend": opts.blend,
        "mixed_gradients": opts.mixed_gradients,
        "focal": opts.focal,
        "pp": list(opts.principal_point) if opts.principal_point else None,
        "seed": opts.seed,
        "ablation_row": opts.ablation_row(),
    }}

    with _stage("model", timings):
        if model is None:
            model = load_model(job.model_path)
        if mapping is None:
            mapping = load_mapping(job.mapping_path)
        mean_coords = model.mean_shape.reshape(-1, 3)
        mean_normals = compute_vertex_normals(mean_coords, model.triangles)

    with _stage("inputs", timings):
        src_img = load_image(job.source.image)
        tgt_img = load_image(job.target.image)

    with _stage("landmarks", timings):
        sides = {}
        for label, side in (("source", job.source), ("target", job.target)):
            _, pts = load_landmarks(side.landmarks)
            if pts.shape[0] != len(mapping):
                raise ValueError(
                    f"{label} landmark file holds {pts.shape[0]} points, "
                    f"mapping expects {len(mapping)}")
            sides[label] = {"p2d": pts}

    with _stage("mask", timings):
        for label, side, img in (("source", job.source, src_img),
                                 ("target", job.target, tgt_img)):
            h, w = img.shape[:2]
            if opts.segmentation and side.mask is not None:
                m = load_mask(side.mask)
                if m.labels.shape != (h, w):
                    raise ValueError(f"{label} mask does not match its image")
                sides[label]["mask"] = m
                sides[label]["mask_mode"] = "file"
            else:
                sides[label]["mask"] = Mask.full(w, h)
                sides[label]["mask_mode"] = "full"

    with _stage("inputs", timings):
        for label, side in (("source", job.source), ("target", job.target)):
            if opts.shape == GENERIC or side.alpha is None:
                sides[label]["alpha"] = ShapeCoeffs.zeros(model)
                sides[label]["alpha_mode"] = "zero"
            else:
                sides[label]["alpha"] = _load_alpha(side.alpha, model)
                sides[label]["alpha_mode"] = "file"

    for label, img in (("source", src_img), ("target", tgt_img)):
        s = sides[label]
        h, w = img.shape[:2]
        cam = default_intrinsics(w, h, focal=opts.focal)
        if opts.principal_point is not None:
            from .pose import CameraIntrinsics

            cam = CameraIntrinsics(focal=cam.focal,
                                   principal_point=tuple(opts.principal_point),
                                   image_size=(w, h))
        s["cam"] = cam

        with _stage("pose", timings):
            neutral = synthesize_shape(model, s["alpha"], None)
            p3d = select_landmarks(neutral, mapping)
            s["pose"] = estimate_pose(s["p2d"], p3d, cam)

        with _stage("expression", timings):
            mean_v = Vertices(coords=mean_coords, normals=mean_normals)
            vis = visible_landmarks(mapping, mean_v, s["pose"])
            s["visible"] = vis
            s["gamma"] = fit_expression(model, s["alpha"], s["pose"], s["p2d"],
                                        mapping, cam, visibility=vis)

        with _stage("synthesize", timings):
            verts = synthesize_shape(model, s["alpha"], s["gamma"])
            verts.normals = compute_vertex_normals(verts.coords, model.triangles)
            s["vertices"] = verts

    src = sides["source"]
    tgt = sides["target"]

    with _stage("sample", timings):
        colors, sampled = sample_vertex_colors(
            src_img, src["vertices"], src["pose"], src["cam"], src["mask"])

    with _stage("transfer", timings):
        tcolors, tsampled = transfer_colors(colors, sampled, tgt["vertices"].count)
        tgt["vertices"].colors = tcolors
        tgt["vertices"].sampled = tsampled

    with _stage("render", timings):
        th, tw = tgt_img.shape[:2]
        layer = render_mesh(tgt["vertices"], model.triangles, tgt["pose"],
                            tgt["cam"], (tw, th), tgt["mask"])

    with _stage("blend", timings):
        if opts.blend == PASTE:
            out = composite_paste(layer, tgt_img)
            blend_info = {"mode": PASTE,
                          "covered_px": int(np.count_nonzero(layer.coverage))}
        else:
            region = Mask(erode_cross(tgt["mask"].labels))
            req = BlendRequest(foreground=layer, target=tgt_img, region=region)
            out_f, info = poisson_blend_float(req, mixed=opts.mixed_gradients)
            out = quantize(out_f)
            blend_info = {"mode": POISSON,
                          "region_rule": "coverage & mask eroded 1px",
                          **info}

    for label in ("source", "target"):
        s = sides[label]
        meta[label] = {
            "pose": _pose_payload(s["pose"], s["cam"]),
            "gamma": [float(g) for g in s["gamma"].gamma],
            "visible": [int(i) for i in s["visible"].visible_indices],
            "visible_landmarks": int(len(s["visible"])),
            "alpha_mode": s["alpha_mode"],
            "mask_mode": s["mask_mode"],
        }
    meta["blend"] = blend_info
    meta["timing_s"] = {k: round(v, 6) for k, v in timings.items()}
    return out, meta


# --- batch ---------------------------------------------------------------------

def side_inputs_for(data_root: Path, ref: str) -> SideInputs:
    """Sidecar convention: x.png pairs with x.landmarks.json, x.mask.png, x.alpha.json."""
    img = Path(data_root) / ref
    stem = img.with_suffix("")
    mask = Path(f"{stem}.mask.png")
    alpha = Path(f"{stem}.alpha.json")
    return SideInputs(
        image=img,
        landmarks=Path(f"{stem}.landmarks.json"),
        mask=mask if mask.exists() else None,
        alpha=alpha if alpha.exists() else None,
    )


def run_batch(plan: SwapPlan, data_root, out_dir, model_path, mapping_path,
              options: SwapOptions, workers: int = 1) -> dict:
    """Run every planned swap; failures are recorded, never abort the batch.

    Jobs run through a thread pool; outputs are identical for any worker
    count. The default stays sequential because the kernels hold the GIL and
    these per-image jobs are compute-bound (threads only add contention at
    typical sizes).

    Outputs land in out_dir as <pairIdx>_<trial>_<side>.png with a .meta.json
    sidecar; batch_report.json counts successes and manifest.csv pairs each
    swapped image with its untouched counterpart for external scoring
    (failed swaps fall back to the original source image).
    """
    data_root = Path(data_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    mapping = load_mapping(mapping_path)

    def run_one(entry):
        name = f"{entry.pair_index}_{plan.trial}_{entry.which_side}.png"
        job = SwapJob(source=side_inputs_for(data_root, entry.source),
                      target=side_inputs_for(data_root, entry.target),
                      model_path=Path(model_path), mapping_path=Path(mapping_path),
                      options=options)
        record = {"pair_index": entry.pair_index, "trial": plan.trial,
                  "side": entry.which_side, "source": entry.source,
                  "target": entry.target, "output": name}
        try:
            out, meta = run_swap(job, model=model, mapping=mapping)
        except StageError as exc:
            record.update(status="failed", stage=exc.stage, error=str(exc.cause))
            return record
        save_image(out, out_dir / name)
        (out_dir / f"{name}.meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        record["status"] = "ok"
        return record

    if workers > 1 and len(plan.entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, plan.entries))
    else:
        records = [run_one(e) for e in plan.entries]

    ok = sum(1 for r in records if r["status"] == "ok")
    report = {"ok": ok, "failed": len(records) - ok, "jobs": records}
    (out_dir / "batch_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    manifest_lines = ["img1,img2,same"]
    for entry, rec in zip(plan.entries, records):
        swapped = rec["output"] if rec["status"] == "ok" else entry.source
        if entry.which_side == "first":
            img1, img2 = swapped, entry.other
        else:
            img1, img2 = entry.other, swapped
        manifest_lines.append(f"{img1},{img2},{int(entry.same)}")
    (out_dir / "manifest.csv").write_text("\n".join(manifest_lines) + "\n",
                                          encoding="utf-8")
    return report
