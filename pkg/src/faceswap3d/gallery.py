"""Synthetic demo gallery: rendered faces with exact landmark/mask/alpha files.

Builds a small dataset in the on-disk layout the batch pipeline expects, with
every input derived from the synthetic morphable model, so the whole system
can be exercised (and hashed for determinism) without any real photos.

Run directly to materialize one:  python -m faceswap3d.gallery OUT_DIR
"""
import json
from pathlib import Path

import numpy as np

from .evalharness import PairEntry, PairList, make_folds, save_pairs
from .model import (
    ExpressionCoeffs,
    ShapeCoeffs,
    compute_vertex_normals,
    generate_synthetic_model,
    save_mapping,
    save_model,
    select_landmarks,
    synthesize_shape,
)
from .pose import Pose, default_intrinsics, rotvec_to_matrix, save_landmarks
from .render import render_mesh, quantize, save_image
from .segment import Mask, save_mask

BACKGROUND = np.array([96.0, 96.0, 96.0])


def _subject_texture(rng, coords: np.ndarray) -> np.ndarray:
    """Smooth per-vertex albedo: a base tone plus gentle positional gradients."""
    base = rng.uniform(110.0, 190.0, 3)
    gains = rng.uniform(-0.45, 0.45, (3, 3))
    rel = coords / np.abs(coords).max(axis=0)
    colors = base[None, :] + 90.0 * (rel @ gains.T)
    return np.clip(colors, 30.0, 225.0)


def _euler_pose(yaw_deg, pitch_deg, roll_deg, t) -> Pose:
    ry = rotvec_to_matrix(np.array([0.0, np.radians(yaw_deg), 0.0]))
    rx = rotvec_to_matrix(np.array([np.radians(pitch_deg), 0.0, 0.0]))
    rz = rotvec_to_matrix(np.array([0.0, 0.0, np.radians(roll_deg)]))
    return Pose(rotation=rz @ rx @ ry, translation=np.asarray(t, dtype=np.float64))


def build_demo_gallery(root, seed: int = 11, n_subjects: int = 3,
                       images_per_subject: int = 2, size: int = 160,
                       n_vertices: int = 1200, folds: int = 3) -> dict:
    """Write model, mapping, images + sidecars, gallery.json, and pairs.csv."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    model, mapping = generate_synthetic_model(seed, n_vertices=n_vertices)
    save_model(model, root / "model.f3d")
    save_mapping(mapping, root / "mapping.txt")

    cam = default_intrinsics(size, size)
    gallery = {}
    images = []
    for s in range(n_subjects):
        subject = f"s{s}"
        alpha = ShapeCoeffs(alpha=rng.normal(0.0, 3.0, model.shape_dim))
        neutral = synthesize_shape(model, alpha, None)
        texture = _subject_texture(rng, neutral.coords)
        gallery[subject] = []
        for k in range(images_per_subject):
            name = f"{subject}_{k}.png"
            gamma = ExpressionCoeffs(
                gamma=rng.uniform(-2.0, 2.0, model.expr_dim) * model.expr_sigma)
            pose = _euler_pose(
                yaw_deg=rng.uniform(-30.0, 30.0),
                pitch_deg=rng.uniform(-12.0, 12.0),
                roll_deg=rng.uniform(-8.0, 8.0),
                t=(rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0),
                   520.0 + rng.uniform(-30.0, 30.0)),
            )
            verts = synthesize_shape(model, alpha, gamma)
            verts.colors = texture
            verts.normals = compute_vertex_normals(verts.coords, model.triangles)
            layer = render_mesh(verts, model.triangles, pose, cam, (size, size),
                                Mask.full(size, size))
            img = np.tile(BACKGROUND, (size, size, 1))
            img[layer.coverage] = layer.color[layer.coverage]
            save_image(quantize(img), root / name)
            save_mask(Mask(layer.coverage), root / f"{subject}_{k}.mask.png")
            lms, _ = _project_landmarks(verts, mapping, pose, cam)
            save_landmarks(name, lms, root / f"{subject}_{k}.landmarks.json")
            (root / f"{subject}_{k}.alpha.json").write_text(
                json.dumps({"alpha": [float(a) for a in alpha.alpha]}) + "\n",
                encoding="utf-8")
            gallery[subject].append(name)
            images.append(name)

    (root / "gallery.json").write_text(
        json.dumps(gallery, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    # interleave same / not-same so contiguous folds stay class-balanced
    entries = []
    for s in range(n_subjects):
        a, b = gallery[f"s{s}"][0], gallery[f"s{s}"][1 % images_per_subject]
        entries.append(PairEntry(ref1=a, ref2=b, same=True))
        other = (s + 1) % n_subjects
        entries.append(PairEntry(ref1=gallery[f"s{s}"][0],
                                 ref2=gallery[f"s{other}"][-1], same=False))
    pairs = PairList(entries=entries, folds=make_folds(len(entries), folds))
    save_pairs(pairs, root / "pairs.csv")

    return {
        "root": str(root),
        "model": str(root / "model.f3d"),
        "mapping": str(root / "mapping.txt"),
        "gallery": str(root / "gallery.json"),
        "pairs": str(root / "pairs.csv"),
        "images": images,
    }


def _project_landmarks(verts, mapping, pose: Pose, cam):
    from .pose import project

    pts3 = select_landmarks(verts, mapping)
    return project(pts3, pose, cam)


def main(argv=None):
    import argparse

    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--size", type=int, default=160)
    ap.add_argument("--subjects", type=int, default=3)
    args = ap.parse_args(argv)
    manifest = build_demo_gallery(args.out_dir, seed=args.seed, size=args.size,
                                  n_subjects=args.subjects)
    print(json.dumps(manifest, indent=2))


if __name__ == "__main__":
    main()
