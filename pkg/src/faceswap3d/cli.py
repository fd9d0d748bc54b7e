"""Command-line entry points.

Verbs: swap, batch, plan, metrics, verify, augment, regions, serve.
A config file of key = value lines (optionally under [command] sections)
supplies defaults; explicit flags always win. Exit code is 0 only when all
requested work succeeded.
"""
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import evalharness as ev
from .errors import FaceSwapError, StageError
from .pipeline import SideInputs, SwapJob, SwapOptions, run_batch, run_swap
from .render import load_image, save_image
from .segment import (
    Occluder,
    augment_hand_overlay,
    augment_mesh_occlusion,
    load_mask,
    propose_regions,
    save_mask,
    save_region_map,
)

COMMANDS = ("swap", "batch", "plan", "metrics", "verify", "augment", "regions", "serve")


def load_config(path) -> dict:
    """Flat key = value pairs; a [section] scopes keys to one command."""
    scoped = {cmd: {} for cmd in COMMANDS}
    section = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in COMMANDS:
                raise click.UsageError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        value = value.strip("\"'")
        key = key.replace("-", "_")
        if section is None:
            for cmd in COMMANDS:
                scoped[cmd].setdefault(key, value)
        else:
            scoped[section][key] = value
    return scoped


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              help="key = value defaults; flags override")
@click.pass_context
def main(ctx, config):
    if config:
        ctx.default_map = load_config(config)


def _swap_options(shape, segmentation, blend, mixed_gradients, focal, pp, seed) -> SwapOptions:
    return SwapOptions(shape=shape, segmentation=(segmentation == "on"),
                       blend=blend, mixed_gradients=mixed_gradients,
                       focal=focal, principal_point=pp or None, seed=seed)


option_shape = click.option("--shape", type=click.Choice(["generic", "estimated"]),
                            default="estimated", show_default=True)
option_seg = click.option("--segmentation", type=click.Choice(["on", "off"]),
                          default="on", show_default=True)
option_blend = click.option("--blend", type=click.Choice(["poisson", "paste"]),
                            default="poisson", show_default=True)
option_mixed = click.option("--mixed-gradients", is_flag=True, default=False,
                            help="mixed guidance field in the Poisson solve")
option_focal = click.option("--focal", type=float, default=None,
                            help="override the default 1.5*max(w,h) focal length")
option_pp = click.option("--pp", type=float, nargs=2, default=None,
                         help="override the principal point (default: image center)")
option_seed = click.option("--seed", type=int, default=0, show_default=True)


@main.command()
@click.option("--source-image", required=True, type=click.Path(exists=True))
@click.option("--source-landmarks", required=True, type=click.Path())
@click.option("--source-mask", type=click.Path(), default=None)
@click.option("--source-alpha", type=click.Path(), default=None)
@click.option("--target-image", required=True, type=click.Path(exists=True))
@click.option("--target-landmarks", required=True, type=click.Path())
@click.option("--target-mask", type=click.Path(), default=None)
@click.option("--target-alpha", type=click.Path(), default=None)
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--mapping", "mapping_path", required=True, type=click.Path(exists=True))
@option_shape
@option_seg
@option_blend
@option_mixed
@option_focal
@option_pp
@option_seed
@click.option("--out", required=True, type=click.Path())
@click.option("--meta", type=click.Path(), default=None)
def swap(source_image, source_landmarks, source_mask, source_alpha,
         target_image, target_landmarks, target_mask, target_alpha,
         model_path, mapping_path, shape, segmentation, blend, mixed_gradients,
         focal, pp, seed, out, meta):
    """Swap the source face onto the target image."""
    job = SwapJob(
        source=SideInputs(image=Path(source_image), landmarks=Path(source_landmarks),
                          mask=Path(source_mask) if source_mask else None,
                          alpha=Path(source_alpha) if source_alpha else None),
        target=SideInputs(image=Path(target_image), landmarks=Path(target_landmarks),
                          mask=Path(target_mask) if target_mask else None,
                          alpha=Path(target_alpha) if target_alpha else None),
        model_path=Path(model_path), mapping_path=Path(mapping_path),
        options=_swap_options(shape, segmentation, blend, mixed_gradients, focal, pp, seed),
    )
    try:
        image, metadata = run_swap(job)
    except StageError as exc:
        click.echo(f"swap failed in stage {exc.stage!r}: {exc.cause}", err=True)
        sys.exit(1)
    save_image(image, out)
    if meta:
        Path(meta).write_text(json.dumps(metadata, sort_keys=True, indent=2) + "\n",
                              encoding="utf-8")
    click.echo(f"wrote {out}")


@main.command()
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--data-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--mapping", "mapping_path", required=True, type=click.Path(exists=True))
@option_shape
@option_seg
@option_blend
@option_mixed
@option_focal
@option_pp
@option_seed
@click.option("--workers", type=int, default=1, show_default=True,
              help="thread-pool size; outputs are identical at any setting")
def batch(plan_path, data_root, out_dir, model_path, mapping_path, shape,
          segmentation, blend, mixed_gradients, focal, pp, seed, workers):
    """Run every swap in a plan; failures are recorded, not fatal."""
    plan = ev.SwapPlan.from_json(Path(plan_path).read_text(encoding="utf-8"))
    options = _swap_options(shape, segmentation, blend, mixed_gradients, focal, pp, seed)
    report = run_batch(plan, data_root, out_dir, model_path, mapping_path,
                       options, workers=workers)
    click.echo(f"batch: {report['ok']} ok, {report['failed']} failed -> {out_dir}")
    if report["failed"]:
        sys.exit(1)


@main.command(name="plan")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--gallery", "gallery_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice([ev.FACE_PRESERVING, ev.CONTEXT_PRESERVING,
                                           ev.INTRA]), required=True)
@click.option("--trial", type=click.Choice(["A", "B"]), default="A", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--folds", type=int, default=ev.DEFAULT_FOLDS, show_default=True)
@click.option("--out", required=True, type=click.Path())
def plan_cmd(pairs_path, gallery_path, mode, trial, seed, folds, out):
    """Emit a SwapPlan JSON for one protocol trial."""
    pairs = ev.load_pairs(pairs_path, fold_count=folds)
    gallery = json.loads(Path(gallery_path).read_text(encoding="utf-8"))
    try:
        if mode == ev.INTRA:
            plan = ev.build_intra_plan(pairs, gallery, seed, trial=trial)
        else:
            plan = ev.build_inter_plan(pairs, gallery, seed, mode=mode, trial=trial)
    except FaceSwapError as exc:
        click.echo(f"plan failed: {exc}", err=True)
        sys.exit(1)
    Path(out).write_text(plan.to_json(), encoding="utf-8")
    click.echo(f"wrote {out} ({len(plan.entries)} entries, "
               f"{plan.substitutions} substitutions)")


@main.command()
@click.option("--pred-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gt-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(), default=None)
def metrics(pred_dir, gt_dir, out):
    """Segmentation scores (mean IOU, global accuracy, ave(face)) over a directory."""
    from .segment import dataset_scores

    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    names = sorted(p.name for p in pred_dir.glob("*.png"))
    if not names:
        click.echo("no prediction masks found", err=True)
        sys.exit(1)
    pairs = []
    for name in names:
        gt = gt_dir / name
        if not gt.exists():
            click.echo(f"missing ground truth for {name}", err=True)
            sys.exit(1)
        try:
            pairs.append((load_mask(pred_dir / name), load_mask(gt)))
        except FaceSwapError as exc:
            click.echo(f"{name}: {exc}", err=True)
            sys.exit(1)
    try:
        scores = dataset_scores(pairs)
    except FaceSwapError as exc:
        click.echo(f"scoring failed: {exc}", err=True)
        sys.exit(1)
    text = json.dumps(scores, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@main.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--scores-b", type=click.Path(exists=True), default=None,
              help="second trial; the report then averages both")
@click.option("--folds", type=int, default=ev.DEFAULT_FOLDS, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--roc", "roc_path", type=click.Path(), default=None)
def verify(pairs_path, scores_path, scores_b, folds, out, roc_path):
    """Verification metrics (100%-EER, accuracy, nAUC) from external scores."""
    pairs = ev.load_pairs(pairs_path, fold_count=folds)
    try:
        m_a = ev.verification_metrics(ev.load_scores(pairs, scores_path))
        if scores_b:
            m_b = ev.verification_metrics(ev.load_scores(pairs, scores_b))
            avg = ev.average_trials(m_a, m_b)
            report = {"trial_a": m_a.report(), "trial_b": m_b.report(),
                      "averaged": avg.report()}
        else:
            report = m_a.report()
    except FaceSwapError as exc:
        click.echo(f"verify failed: {exc}", err=True)
        sys.exit(1)
    ev.save_report(report, out)
    if roc_path:
        ev.save_roc_csv(m_a, roc_path)
    click.echo(json.dumps(report, sort_keys=True, indent=2))
    row = report.get("averaged", report)
    click.echo(ev.format_row(row))


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--mask", "mask_path", required=True, type=click.Path(exists=True))
@click.option("--placement", required=True, type=click.Path(exists=True),
              help="occluder placement JSON (mesh or hand)")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--mapping", "mapping_path", type=click.Path(exists=True), default=None)
@click.option("--landmarks", "landmarks_path", type=click.Path(exists=True), default=None)
@click.option("--alpha", "alpha_path", type=click.Path(exists=True), default=None)
@option_focal
@click.option("--out-image", required=True, type=click.Path())
@click.option("--out-mask", required=True, type=click.Path())
def augment(image_path, mask_path, placement, model_path, mapping_path,
            landmarks_path, alpha_path, focal, out_image, out_mask):
    """Add a synthetic occlusion (CG mesh or hand patch) to an image + mask."""
    spec = json.loads(Path(placement).read_text(encoding="utf-8"))
    kind = spec.get("type")
    try:
        image = load_image(image_path)
        mask = load_mask(mask_path)
        if kind == "hand":
            from PIL import Image as PILImage

            patch_img = PILImage.open(spec["patch"]).convert("RGBA")
            rgba = np.asarray(patch_img)
            occ = Occluder(patch=rgba[..., :3],
                           alpha=rgba[..., 3].astype(np.float64) / 255.0)
            out_img, out_m = augment_hand_overlay(image, mask, occ,
                                                  tuple(spec["position"]))
        elif kind == "mesh":
            if not (model_path and mapping_path and landmarks_path):
                click.echo("mesh placement needs --model, --mapping, and --landmarks",
                           err=True)
                sys.exit(1)
            from .model import (
                ShapeCoeffs,
                load_mapping,
                load_model,
                select_landmarks,
                synthesize_shape,
            )
            from .pose import default_intrinsics, estimate_pose, load_landmarks

            model = load_model(model_path)
            mapping = load_mapping(mapping_path)
            _, p2d = load_landmarks(landmarks_path)
            alpha = None
            if alpha_path:
                payload = json.loads(Path(alpha_path).read_text(encoding="utf-8"))
                alpha = ShapeCoeffs(alpha=np.asarray(payload["alpha"], dtype=np.float64))
            shape = synthesize_shape(model, alpha, None)
            h, w = image.shape[:2]
            cam = default_intrinsics(w, h, focal=focal)
            pose = estimate_pose(p2d, select_landmarks(shape, mapping), cam)
            occ = Occluder(vertices=np.asarray(spec["vertices"], dtype=np.float64),
                           triangles=np.asarray(spec["triangles"], dtype=np.int32),
                           color=tuple(spec.get("color", (40, 40, 40))))
            out_img, out_m = augment_mesh_occlusion(image, mask, occ, shape.coords,
                                                    model.triangles, pose, cam)
        else:
            click.echo(f"placement type must be 'mesh' or 'hand', got {kind!r}",
                       err=True)
            sys.exit(1)
    except FaceSwapError as exc:
        click.echo(f"augment failed: {exc}", err=True)
        sys.exit(1)
    save_image(out_img, out_image)
    save_mask(out_m, out_mask)
    click.echo(f"wrote {out_image} and {out_mask}")


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--granularity", type=float, default=0.05, show_default=True,
              help="color-merge tolerance; smaller = finer partition")
@click.option("--out-png", required=True, type=click.Path())
@click.option("--out-json", required=True, type=click.Path())
def regions(image_path, granularity, out_png, out_json):
    """Region proposals for the labeling UI (16-bit id PNG + count JSON)."""
    rm = propose_regions(load_image(image_path), granularity=granularity)
    save_region_map(rm, out_png, out_json)
    click.echo(f"wrote {out_png} ({rm.count} regions)")


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--granularity", type=float, default=0.05, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="also serve a built frontend from this directory")
def serve(root, host, port, granularity, ui_dir):
    """Serve frames, region proposals, and mask storage for the editor UI."""
    from .server import serve as run_server

    click.echo(f"serving {root} on http://{host}:{port}")
    run_server(root, port=port, host=host, granularity=granularity, ui_dir=ui_dir)


if __name__ == "__main__":
    main()
